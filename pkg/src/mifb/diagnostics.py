"""Lyapunov monitoring and empirical convergence-rate fits.

The rate fitter classifies an error sequence as ``finite``, ``linear``
(geometric), ``power_law`` or ``undetermined`` by comparing straight-line
fits of ``log(gap)`` against ``k`` and against ``log(k)`` on the tail.
The KL exponent ``theta`` of the objective predicts the regime:

==============  ============  ========================
theta           regime        exponent (values/iterates)
==============  ============  ========================
1               finite        -
[1/2, 1)        linear        -
(0, 1/2)        power_law     1/(2θ-1) / θ/(2θ-1)
==============  ============  ========================
"""

from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from .exceptions import InsufficientDataError, InvalidArgumentError

__all__ = [
    "REGIMES",
    "LyapunovWeights",
    "RateReport",
    "lyapunov_weights",
    "lyapunov_value",
    "check_descent",
    "fit_rate",
    "predict_regime",
    "predict_iterate_regime",
    "estimate_phi_star",
    "gap_floor",
    "trace_rate_report",
    "gap_rate_report",
    "iterate_rate_report",
]

REGIMES = ("finite", "linear", "power_law", "undetermined")

MIN_TAIL_POINTS = 10
MIN_R_SQUARED = 0.9
# Gaps within this many machine epsilons of |phi*| are roundoff.
FLOOR_EPS_MULTIPLE = 1e2
# A drop to the floor from more than this multiple of it is an exact hit,
# not a geometric approach that ran out of precision.
FINITE_JUMP = 1e6
DESCENT_RTOL = 1e-9
# Below this k_stop/k_start ratio, log(k) is nearly collinear with k and a
# power law cannot be told apart from a geometric decay.
POWER_MIN_SPAN = 2.0


@dataclass(frozen=True)
class LyapunovWeights:
    """Partial sums ``coeffs[i] = sum_{j >= i} alpha_sup[j]``."""

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=float)
        if np.any(c < 0) or np.any(np.diff(c) > 0):
            raise InvalidArgumentError(f"weights must be nonnegative and nonincreasing, got {c}")


def lyapunov_weights(alpha_sup):
    a = np.asarray(alpha_sup, dtype=float)
    return LyapunovWeights(coeffs=np.cumsum(a[::-1])[::-1].copy())


def lyapunov_value(deltas, phi, weights):
    """``phi + sum_i coeffs[i] * deltas[i]**2``.

    ``deltas[i]`` is the step length ``||x_{k-i} - x_{k-i-1}||``.
    """
    d = np.asarray(deltas, dtype=float)
    return float(phi + np.dot(weights.coeffs, d * d))


def check_descent(psi_seq, delta, delta_x_seq, rtol=DESCENT_RTOL):
    """Indices ``k`` where ``psi[k+1] > psi[k] - delta * dx[k+1]**2 + tol``.

    ``tol = rtol * max(1, |psi[k]|)``. An empty list means the sufficient
    decrease holds along the whole sequence.
    """
    psi = np.asarray(psi_seq, dtype=float)
    dx = np.asarray(delta_x_seq, dtype=float)
    if psi.shape != dx.shape:
        raise InvalidArgumentError(f"sequence lengths differ: {psi.shape} vs {dx.shape}")
    lhs = psi[1:]
    rhs = psi[:-1] - delta * dx[1:] ** 2 + rtol * np.maximum(1.0, np.abs(psi[:-1]))
    with np.errstate(invalid="ignore"):
        bad = lhs > rhs
    return [int(i) for i in np.flatnonzero(bad)]


@dataclass(frozen=True)
class RateReport:
    regime: str
    linear_factor: Optional[float] = None
    power_exponent: Optional[float] = None
    r_squared: float = float("nan")
    linear_r_squared: float = float("nan")
    power_r_squared: float = float("nan")
    n_fit: int = 0
    fit_start: Optional[int] = None
    fit_stop: Optional[int] = None
    predicted_regime: Optional[str] = None
    predicted_exponent: Optional[float] = None

    def to_dict(self):
        return {k: (None if isinstance(v, float) and np.isnan(v) else v) for k, v in asdict(self).items()}

    @property
    def matches_prediction(self):
        if self.predicted_regime is None:
            return None
        return self.regime == self.predicted_regime


def _line_fit(t, y):
    slope, intercept = np.polyfit(t, y, 1)
    resid = y - (slope * t + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 0.0
    return float(slope), r2


def gap_floor(scale):
    return FLOOR_EPS_MULTIPLE * np.finfo(float).eps * abs(scale)


def _tail_start(gaps, tail_fraction):
    # The tail is measured in decades of decay, not in points: the fit
    # starts where log(gap) first enters the last `tail_fraction` of the
    # range between the first and the smallest usable gap. Early transients
    # (e.g. support identification) then stay out of the window however
    # many iterations they take.
    if len(gaps) == 0:
        return 0
    logg = np.log(gaps)
    lo, hi = float(logg.min()), float(logg[0])
    if not hi > lo:
        return int(np.floor((1.0 - tail_fraction) * len(gaps)))
    threshold = lo + tail_fraction * (hi - lo)
    return int(np.argmax(logg <= threshold))


def fit_rate(phi_gaps, tail_fraction=0.5, k=None, scale=0.0, theta=None):
    """Classify the decay of a gap sequence.

    Parameters
    ----------
    phi_gaps : array_like
        ``Phi(x_k) - Phi*`` (or any error sequence).
    tail_fraction : float
        Part of the total decay to fit, in log scale: 0.5 fits the points
        after the gap has fallen through half of its decades.
    k : array_like, optional
        Iteration indices, default ``1..n``.
    scale : float
        ``|Phi*|``; gaps at or below ``1e2 * eps * scale`` count as zero
        and end the usable sequence.
    theta : float, optional
        KL exponent; fills the predicted fields.

    Raises
    ------
    InsufficientDataError
        If fewer than 10 points remain in the fitted tail.
    """
    if not 0 < tail_fraction < 1:
        raise InvalidArgumentError(f"tail_fraction must lie in (0, 1), got {tail_fraction}")
    gaps = np.asarray(phi_gaps, dtype=float)
    k = np.arange(1, len(gaps) + 1, dtype=float) if k is None else np.asarray(k, dtype=float)
    if k.shape != gaps.shape:
        raise InvalidArgumentError("k and phi_gaps must have the same length")
    pred = {}
    if theta is not None:
        pred["predicted_regime"], pred["predicted_exponent"] = predict_regime(theta)

    floor = gap_floor(scale)
    below = gaps <= floor
    n = len(gaps)
    if n and below[-1]:
        # first index from which the sequence stays at the floor
        above = np.flatnonzero(~below)
        j0 = 0 if len(above) == 0 else int(above[-1]) + 1
        if j0 == 0 or gaps[j0 - 1] > FINITE_JUMP * floor:
            return RateReport(
                regime="finite",
                r_squared=1.0,
                n_fit=n,
                fit_start=int(k[0]) if n else None,
                fit_stop=int(k[j0]) if n else None,
                **pred,
            )
    stop = int(np.argmax(below)) if below.any() else n
    start = _tail_start(gaps[:stop], tail_fraction)
    tk, tg = k[start:stop], gaps[start:stop]
    if len(tg) < MIN_TAIL_POINTS:
        raise InsufficientDataError(
            f"only {len(tg)} tail points above the gap floor; need {MIN_TAIL_POINTS}"
        )
    logg = np.log(tg)
    lin_slope, lin_r2 = _line_fit(tk, logg)
    if tk[0] > 0 and tk[-1] / tk[0] >= POWER_MIN_SPAN:
        pow_slope, pow_r2 = _line_fit(np.log(tk), logg)
    else:
        pow_slope, pow_r2 = float("nan"), float("-inf")

    common = dict(
        linear_r_squared=lin_r2,
        power_r_squared=pow_r2,
        n_fit=len(tg),
        fit_start=int(tk[0]),
        fit_stop=int(tk[-1]),
        **pred,
    )
    if lin_r2 >= pow_r2:
        q = float(np.exp(lin_slope))
        if lin_r2 >= MIN_R_SQUARED and 0 < q < 1:
            return RateReport(regime="linear", linear_factor=q, r_squared=lin_r2, **common)
        return RateReport(regime="undetermined", r_squared=lin_r2, **common)
    if pow_r2 >= MIN_R_SQUARED and pow_slope < 0:
        return RateReport(regime="power_law", power_exponent=pow_slope, r_squared=pow_r2, **common)
    return RateReport(regime="undetermined", r_squared=pow_r2, **common)


def _check_theta(theta):
    if not 0 < theta <= 1:
        raise InvalidArgumentError(f"KL exponent must lie in (0, 1], got {theta}")


def predict_regime(theta):
    """Regime and power exponent of ``Phi(x_k) - Phi*`` for KL exponent ``theta``."""
    _check_theta(theta)
    if theta == 1:
        return "finite", None
    if theta >= 0.5:
        return "linear", None
    return "power_law", 1.0 / (2.0 * theta - 1.0)


def predict_iterate_regime(theta):
    """Same as :func:`predict_regime` for ``||x_k - x*||``."""
    regime, _ = predict_regime(theta)
    if regime == "power_law":
        return regime, theta / (2.0 * theta - 1.0)
    return regime, None


def estimate_phi_star(phi_seq, burn_iters):
    """Objective value attained after ``burn_iters`` iterations."""
    phi = np.asarray(phi_seq, dtype=float)
    burn_iters = int(burn_iters)
    if burn_iters < 1:
        raise InvalidArgumentError(f"burn_iters must be positive, got {burn_iters}")
    if len(phi) < burn_iters:
        raise InsufficientDataError(
            f"sequence has {len(phi)} values, fewer than burn_iters={burn_iters}"
        )
    return float(phi[burn_iters - 1])


def trace_rate_report(k, phi, phi_star, theta=None, tail_fraction=0.5):
    """Fit ``phi - phi_star`` over ``k >= 1``."""
    gaps = np.asarray(phi, dtype=float) - phi_star
    return gap_rate_report(k, gaps, phi_star, theta, tail_fraction)


def gap_rate_report(k, gaps, phi_star, theta=None, tail_fraction=0.5):
    """Fit precomputed gaps over ``k >= 1`` with the floor scaled by ``phi_star``.

    Exported traces carry the gap column verbatim, so refitting a CSV goes
    through here with the very same numbers as the in-memory trace.
    """
    k = np.asarray(k, dtype=float)
    gaps = np.asarray(gaps, dtype=float)
    keep = k >= 1
    return fit_rate(gaps[keep], tail_fraction, k=k[keep], scale=abs(phi_star), theta=theta)


def iterate_rate_report(k, iterates, theta=None, tail_fraction=0.5):
    """Fit ``||x_k - x_final||`` with the last iterate standing in for ``x*``.

    The final point itself is dropped; predicted fields use the iterate
    exponent ``theta / (2 theta - 1)``.
    """
    X = np.asarray(iterates, dtype=float)
    k = np.asarray(k, dtype=float)
    err = np.linalg.norm(X[:-1] - X[-1], axis=-1) if X.ndim == 2 else np.abs(X[:-1] - X[-1])
    k = k[:-1]
    keep = k >= 1
    scale = float(np.linalg.norm(X[-1]))
    rep = fit_rate(err[keep], tail_fraction, k=k[keep], scale=scale)
    if theta is None:
        return rep
    regime, expo = predict_iterate_regime(theta)
    return RateReport(**{**asdict(rep), "predicted_regime": regime, "predicted_exponent": expo})
