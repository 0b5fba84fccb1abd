import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mifb.exceptions import InvalidArgumentError
from mifb.prox import (
    L1Params,
    ScadParams,
    box_indicator,
    box_projection,
    l0_prox,
    l0_value,
    l1_prox,
    l1_value,
    scad_prox,
    scad_value,
)

reals = st.floats(-20, 20, allow_nan=False)
steps = st.floats(0.01, 3.0)
lams = st.floats(0.05, 3.0)
scad_as = st.floats(2.2, 8.0)


def grid_min(obj, lo, hi, step=1e-4):
    t = np.arange(lo, hi + step, step)
    return float(obj(t).min())


# -- SCAD -------------------------------------------------------------------


@pytest.mark.parametrize(
    "x, expected", [([0.0], 0.0), ([10.0], 3.0), ([0.5, 10.0], 3.5)]
)
def test_scad_value_examples(x, expected):
    assert scad_value(ScadParams(1.0, 5.0), np.array(x)) == pytest.approx(expected, abs=1e-15)


@pytest.mark.parametrize("lam, a", [(1.0, 5.0), (0.3, 2.5), (2.0, 3.7)])
def test_scad_value_continuous_at_breakpoints(lam, a):
    p = ScadParams(lam, a)
    for t in (lam, a * lam):
        left = scad_value(p, np.array([t * (1 - 1e-13)]))
        right = scad_value(p, np.array([t * (1 + 1e-13)]))
        assert abs(left - right) < 1e-12


def test_scad_prox_examples():
    p = ScadParams(1.0, 5.0)
    assert scad_prox(p, np.array([0.0]), 1.0).tolist() == [0.0]
    assert scad_prox(p, np.array([10.0]), 1.0).tolist() == [10.0]
    # frozen oracle: grid search over [-2, 2] at step 1e-5 lands on 0.5,
    # cost 0.5 * 0.5 + 0.5 * 0.25 = 0.375
    out = scad_prox(p, np.array([1.0]), 0.5)
    assert out[0] == pytest.approx(0.5, abs=1e-15)
    t = np.round(np.arange(-2, 2 + 1e-5, 1e-5), 10)
    cost = 0.5 * np.array([scad_value(p, [v]) for v in t[::100]]) + 0.5 * (t[::100] - 1) ** 2
    assert t[::100][np.argmin(cost)] == pytest.approx(0.5, abs=1e-9)


def test_scad_prox_tie_prefers_larger_magnitude():
    # lam=1, a=3, gamma=4, x=4: cost(0) = x^2/2 = 8 and
    # cost(4) = gamma (a+1) lam^2 / 2 = 8; every other t costs more
    p = ScadParams(1.0, 3.0)
    assert scad_prox(p, np.array([4.0, -4.0]), 4.0).tolist() == [4.0, -4.0]


def test_scad_params_validation():
    with pytest.raises(InvalidArgumentError):
        ScadParams(lam=0.0)
    with pytest.raises(InvalidArgumentError):
        ScadParams(a=2.0)
    with pytest.raises(InvalidArgumentError):
        scad_prox(ScadParams(), np.array([1.0]), 0.0)


@given(x=reals, gamma=steps, lam=lams, a=scad_as)
def test_scad_prox_is_odd(x, gamma, lam, a):
    p = ScadParams(lam, a)
    assert scad_prox(p, np.array([-x]), gamma)[0] == -scad_prox(p, np.array([x]), gamma)[0]


@given(x=st.floats(-6, 6), gamma=steps, lam=st.floats(0.1, 1.5), a=st.floats(2.2, 5.0))
def test_scad_prox_dominates_grid(x, gamma, lam, a):
    p = ScadParams(lam, a)
    obj = lambda t: gamma * _scad_vec(p, t) + 0.5 * (t - x) ** 2
    out = scad_prox(p, np.array([x]), gamma)
    r = 2 * (abs(x) + a * lam)
    assert obj(out)[0] <= grid_min(obj, -r, r, 1e-3) + 1e-9


def _scad_vec(p, t):
    t = np.abs(t)
    lam, a = p.lam, p.a
    return np.where(
        t <= lam,
        lam * t,
        np.where(t <= a * lam, (2 * a * lam * t - t * t - lam * lam) / (2 * (a - 1)), (a + 1) * lam * lam / 2),
    )


# -- l1 ---------------------------------------------------------------------


def test_l1_prox_examples():
    assert l1_prox(L1Params(1.0), np.array([0.0, 0.5]), 1.0).tolist() == [0.0, 0.0]
    assert l1_prox(L1Params(1.0), np.array([3.0, -3.0]), 1.0).tolist() == [2.0, -2.0]
    assert l1_prox(L1Params(0.01), np.array([1.0]), 1.0)[0] == pytest.approx(0.99, abs=1e-15)


def test_l1_value():
    assert l1_value(L1Params(0.5), np.array([1.0, -3.0])) == 2.0
    with pytest.raises(InvalidArgumentError):
        L1Params(0.0)


@given(x=reals, y=reals, gamma=steps, lam=lams)
def test_l1_prox_nonexpansive_and_odd(x, y, gamma, lam):
    p = L1Params(lam)
    px, py = l1_prox(p, np.array([x]), gamma)[0], l1_prox(p, np.array([y]), gamma)[0]
    assert abs(px - py) <= abs(x - y) + 1e-12
    assert l1_prox(p, np.array([-x]), gamma)[0] == -px


# -- l0 ---------------------------------------------------------------------


def test_l0_prox_examples():
    assert l0_prox(1.0, np.array([0.5]), 0.5).tolist() == [0.0]
    assert l0_prox(1.0, np.array([2.0]), 0.5).tolist() == [2.0]
    # tie at the threshold keeps x
    assert l0_prox(1.0, np.array([1.0]), 0.5).tolist() == [1.0]
    assert l0_value(2.0, np.array([0.0, 1.0, -3.0])) == 4.0


@given(x=reals, gamma=steps, lam=lams)
def test_l0_prox_is_odd_and_optimal(x, gamma, lam):
    out = l0_prox(lam, np.array([x]), gamma)[0]
    assert l0_prox(lam, np.array([-x]), gamma)[0] == -out
    cost = lambda t: gamma * lam * (t != 0) + 0.5 * (t - x) ** 2
    assert cost(out) <= min(cost(0.0), cost(x)) + 1e-12


# -- box --------------------------------------------------------------------


def test_box_examples():
    assert box_projection(1.0, np.array([0.3])).tolist() == [0.3]
    assert box_projection(1.0, np.array([2.0, -5.0])).tolist() == [1.0, -1.0]
    assert box_projection(1.0, np.array([-1.0])).tolist() == [-1.0]
    assert box_indicator(1.0, np.array([0.5])) == 0.0
    assert box_indicator(1.0, np.array([1.5])) == float("inf")
    with pytest.raises(InvalidArgumentError):
        box_projection(0.0, np.array([1.0]))


@given(x=reals, y=reals, r=st.floats(0.1, 5))
def test_box_projection_properties(x, y, r):
    px, py = box_projection(r, np.array([x])), box_projection(r, np.array([y]))
    assert abs(px[0] - py[0]) <= abs(x - y)
    assert box_projection(r, px).tolist() == px.tolist()
    assert box_projection(r, np.array([-x]))[0] == -px[0]
