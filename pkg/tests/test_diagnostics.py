import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mifb.diagnostics import (
    LyapunovWeights,
    check_descent,
    estimate_phi_star,
    fit_rate,
    gap_floor,
    iterate_rate_report,
    lyapunov_value,
    lyapunov_weights,
    predict_iterate_regime,
    predict_regime,
    trace_rate_report,
)
from mifb.exceptions import InsufficientDataError, InvalidArgumentError


def test_lyapunov_examples():
    w1 = lyapunov_weights([0.4])
    assert lyapunov_value([0.0], 3.0, w1) == 3.0
    assert lyapunov_value([0.5], 2.0, w1) == pytest.approx(2.1, abs=1e-15)
    w2 = lyapunov_weights([0.3, 0.1])
    assert w2.coeffs.tolist() == pytest.approx([0.4, 0.1], abs=1e-15)
    assert lyapunov_value([1.0, 2.0], 1.0, w2) == pytest.approx(1.8, abs=1e-15)


def test_lyapunov_weights_invariant():
    with pytest.raises(InvalidArgumentError):
        LyapunovWeights(np.array([0.1, 0.4]))
    with pytest.raises(InvalidArgumentError):
        LyapunovWeights(np.array([-0.1]))


@given(
    alpha=st.lists(st.floats(0, 10), min_size=1, max_size=4),
    phi=st.floats(-1e3, 1e3),
    data=st.data(),
)
def test_psi_at_least_phi(alpha, phi, data):
    d = data.draw(st.lists(st.floats(0, 10), min_size=len(alpha), max_size=len(alpha)))
    w = lyapunov_weights(alpha)
    assert np.all(np.diff(w.coeffs) <= 0)
    assert lyapunov_value(d, phi, w) >= phi


def test_check_descent_examples():
    assert check_descent([3.0, 2.0, 1.0], 0.5, [0.0, 1.0, 1.0]) == []
    assert check_descent([3.0, 2.9], 0.5, [0.0, 1.0]) == [0]
    with pytest.raises(InvalidArgumentError):
        check_descent([1.0, 2.0], 0.5, [0.0])


def test_check_descent_tolerance_scales_with_psi():
    # a rise of 5e-10 relative to |psi| = 1e3 is within 1e-9 * 1e3
    assert check_descent([1e3, 1e3 + 5e-7], 0.0, [0.0, 0.0]) == []
    assert check_descent([1.0, 1.0 + 5e-9], 0.0, [0.0, 0.0]) == [0]


def test_fit_rate_power_example():
    k = np.arange(1, 1001, dtype=float)
    rep = fit_rate(k**-2.0, 0.5)
    assert rep.regime == "power_law"
    assert rep.power_exponent == pytest.approx(-2.0, abs=1e-6)
    assert rep.r_squared == pytest.approx(1.0, abs=1e-9)
    assert rep.linear_factor is None


def test_fit_rate_linear_example():
    k = np.arange(1, 201, dtype=float)
    rep = fit_rate(0.9**k, 0.5)
    assert rep.regime == "linear"
    assert rep.linear_factor == pytest.approx(0.9, abs=1e-6)


def test_fit_rate_finite():
    gaps = np.concatenate([0.5 ** np.arange(1, 20), np.zeros(30)])
    assert fit_rate(gaps, 0.5).regime == "finite"
    assert fit_rate(np.zeros(20), 0.5).regime == "finite"


def test_fit_rate_cuts_at_roundoff_floor():
    # geometric decay that reaches the floor gradually is linear, not finite
    k = np.arange(1, 400, dtype=float)
    gaps = np.maximum(1.0 * 0.9**k, 0.0)
    gaps[gaps < gap_floor(1.0)] = 0.0
    rep = fit_rate(gaps, 0.5, scale=1.0)
    assert rep.regime == "linear" and rep.linear_factor == pytest.approx(0.9, rel=1e-9)


def test_fit_rate_undetermined_on_noise():
    gaps = np.random.default_rng(0).uniform(0.5, 1.5, 200)
    assert fit_rate(gaps, 0.5).regime == "undetermined"


def test_fit_rate_errors():
    with pytest.raises(InsufficientDataError):
        fit_rate(0.9 ** np.arange(1, 12.0), 0.5)
    with pytest.raises(InvalidArgumentError):
        fit_rate(np.ones(50), 1.0)
    with pytest.raises(InvalidArgumentError):
        fit_rate(np.ones(50), 0.5, k=np.arange(3))


def test_fit_rate_predicted_fields_only_with_theta():
    g = 0.9 ** np.arange(1, 200.0)
    assert fit_rate(g).predicted_regime is None and fit_rate(g).matches_prediction is None
    rep = fit_rate(g, theta=0.5)
    assert rep.predicted_regime == "linear" and rep.matches_prediction


@given(q=st.floats(0.3, 0.97), c=st.floats(1e-3, 1e3))
def test_fit_rate_recovers_geometric(q, c):
    k = np.arange(1, 400, dtype=float)
    rep = fit_rate(c * q**k)
    assert rep.regime == "linear"
    assert rep.linear_factor == pytest.approx(q, rel=1e-4)


@given(e=st.floats(-5.0, -0.8), c=st.floats(1e-3, 1e3))
def test_fit_rate_recovers_power(e, c):
    k = np.arange(1, 3001, dtype=float)
    rep = fit_rate(c * k**e)
    assert rep.regime == "power_law"
    assert rep.power_exponent == pytest.approx(e, rel=1e-4)


def test_predict_regime_examples():
    assert predict_regime(1.0) == ("finite", None)
    assert predict_regime(0.5) == ("linear", None)
    assert predict_regime(0.75) == ("linear", None)
    assert predict_regime(0.25) == ("power_law", -2.0)
    assert predict_iterate_regime(0.25) == ("power_law", -0.5)
    for bad in (0.0, -0.1, 1.01):
        with pytest.raises(InvalidArgumentError):
            predict_regime(bad)


@given(theta=st.floats(1e-6, 1.0))
def test_predict_regime_partitions_the_interval(theta):
    regime, expo = predict_regime(theta)
    if theta == 1:
        assert regime == "finite"
    elif theta >= 0.5:
        assert regime == "linear" and expo is None
    else:
        assert regime == "power_law" and expo < 0


def test_estimate_phi_star_examples():
    assert estimate_phi_star([2.5] * 10, 5) == 2.5
    k = np.arange(0, 40)
    phi = 1 + 4.0 ** (-k)
    assert estimate_phi_star(phi[1:], 20) == 1 + 4.0**-20
    with pytest.raises(InsufficientDataError):
        estimate_phi_star([1.0, 2.0], 3)
    with pytest.raises(InvalidArgumentError):
        estimate_phi_star([1.0], 0)


def test_trace_rate_report_skips_k0():
    k = np.arange(0, 300)
    phi = 2.0 + 0.8**k
    phi[0] = 1e6  # an outlier at k = 0 must not affect the fit
    rep = trace_rate_report(k, phi, 2.0, theta=0.5)
    assert rep.regime == "linear" and rep.linear_factor == pytest.approx(0.8, rel=1e-4)


def test_iterate_rate_report_power_law():
    k = np.arange(0, 5001)
    x = (k + 1.0) ** -0.5
    x = np.concatenate([x, [0.0]])[:, None]
    rep = iterate_rate_report(np.arange(len(x)), x, theta=0.25)
    assert rep.predicted_regime == "power_law" and rep.predicted_exponent == -0.5
    assert rep.regime == "power_law" and rep.power_exponent == pytest.approx(-0.5, rel=1e-2)
