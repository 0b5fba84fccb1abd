"""Closed-form proximal maps for separable sparsity penalties and boxes.

Every map here acts coordinate-wise and returns one element of

    argmin_t  gamma * r(t) + 0.5 * (t - x)**2

When that set has more than one element the choice is deterministic:
hard thresholding keeps ``x`` at the threshold, SCAD returns the minimizer
of larger magnitude.
"""

from dataclasses import dataclass

import numpy as np

from .exceptions import InvalidArgumentError

__all__ = [
    "ScadParams",
    "L1Params",
    "scad_value",
    "scad_prox",
    "l1_value",
    "l1_prox",
    "l0_value",
    "l0_prox",
    "box_indicator",
    "box_projection",
]

# Near-ties in the SCAD candidate comparison are resolved toward the larger
# magnitude; this is the relative slack used to call two costs equal.
_TIE_RTOL = 1e-14


@dataclass(frozen=True)
class ScadParams:
    """Smoothly clipped absolute deviation penalty parameters.

    Parameters
    ----------
    lam : float
        Threshold level, > 0.
    a : float
        Concavity parameter, > 2. The penalty is constant beyond ``a * lam``.
    """

    lam: float = 1.0
    a: float = 5.0

    def __post_init__(self):
        if not self.lam > 0:
            raise InvalidArgumentError(f"SCAD lambda must be positive, got {self.lam}")
        if not self.a > 2:
            raise InvalidArgumentError(f"SCAD a must exceed 2, got {self.a}")


@dataclass(frozen=True)
class L1Params:
    lam: float = 0.01

    def __post_init__(self):
        if not self.lam > 0:
            raise InvalidArgumentError(f"l1 lambda must be positive, got {self.lam}")


def _check_gamma(gamma):
    if not gamma > 0:
        raise InvalidArgumentError(f"prox step gamma must be positive, got {gamma}")


def scad_value(params, x):
    """Sum of the three-branch SCAD penalty over the entries of ``x``."""
    lam, a = params.lam, params.a
    t = np.abs(np.asarray(x, dtype=float))
    inner = lam * t
    middle = -(t * t - 2.0 * a * lam * t + lam * lam) / (2.0 * (a - 1.0))
    outer = np.full_like(t, 0.5 * (a + 1.0) * lam * lam)
    r = np.where(t <= lam, inner, np.where(t <= a * lam, middle, outer))
    return float(np.sum(r))


def _scad_penalty_abs(t, lam, a):
    # elementwise penalty of nonnegative t
    return np.where(
        t <= lam,
        lam * t,
        np.where(
            t <= a * lam,
            -(t * t - 2.0 * a * lam * t + lam * lam) / (2.0 * (a - 1.0)),
            0.5 * (a + 1.0) * lam * lam,
        ),
    )


def scad_prox(params, x, gamma):
    """Proximal map of ``gamma * scad``.

    The penalty is piecewise on ``|t|``: linear on ``[0, lam]``, concave
    quadratic on ``[lam, a*lam]``, constant afterwards. On each closed piece
    the one-dimensional minimizer is either the clipped stationary point or
    a piece endpoint, so the global minimizer is found by comparing at most
    six candidates per coordinate.
    """
    _check_gamma(gamma)
    lam, a = params.lam, params.a
    x = np.asarray(x, dtype=float)
    ax = np.abs(x)

    # linear piece: soft threshold clipped to [0, lam]
    c_inner = np.clip(ax - gamma * lam, 0.0, lam)
    # quadratic piece: stationary point of the (possibly concave) quadratic
    curv = a - 1.0 - gamma
    if curv > 0:
        c_mid = np.clip(((a - 1.0) * ax - gamma * a * lam) / curv, lam, a * lam)
    else:
        c_mid = np.full_like(ax, lam)
    # constant piece: identity clipped to [a*lam, inf)
    c_outer = np.maximum(ax, a * lam)

    cands = np.stack(
        [
            np.zeros_like(ax),
            c_inner,
            np.full_like(ax, lam),
            c_mid,
            np.full_like(ax, a * lam),
            c_outer,
        ]
    )
    cost = gamma * _scad_penalty_abs(cands, lam, a) + 0.5 * (cands - ax) ** 2
    best = cost.min(axis=0)
    slack = _TIE_RTOL * np.maximum(1.0, np.abs(best))
    near = cost <= best + slack
    t = np.where(near, cands, -np.inf).max(axis=0)
    return np.sign(x) * t


def l1_value(params, x):
    return float(params.lam * np.sum(np.abs(np.asarray(x, dtype=float))))


def l1_prox(params, x, gamma):
    """Soft thresholding at level ``gamma * lam``."""
    _check_gamma(gamma)
    x = np.asarray(x, dtype=float)
    return np.sign(x) * np.maximum(np.abs(x) - gamma * params.lam, 0.0)


def l0_value(lam, x):
    return float(lam * np.count_nonzero(np.asarray(x, dtype=float)))


def l0_prox(lam, x, gamma):
    """Hard thresholding at ``sqrt(2 * gamma * lam)``; ties keep ``x``."""
    _check_gamma(gamma)
    if not lam > 0:
        raise InvalidArgumentError(f"l0 lambda must be positive, got {lam}")
    x = np.asarray(x, dtype=float)
    thresh = np.sqrt(2.0 * gamma * lam)
    return np.where(np.abs(x) < thresh, 0.0, x)


def box_indicator(radius, x):
    """0 inside ``[-radius, radius]^n`` and ``inf`` outside."""
    x = np.asarray(x, dtype=float)
    return 0.0 if np.all(np.abs(x) <= radius) else float("inf")


def box_projection(radius, x):
    if not radius > 0:
        raise InvalidArgumentError(f"box radius must be positive, got {radius}")
    return np.clip(np.asarray(x, dtype=float), -radius, radius)
