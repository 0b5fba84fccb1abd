"""Composite objectives ``Phi = f + g`` with a smooth and a prox-friendly part."""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import prox as _prox
from .exceptions import InvalidArgumentError, NumericalFailureError

__all__ = [
    "SmoothTerm",
    "NonsmoothTerm",
    "CompositeProblem",
    "objective_value",
    "check_gradient",
    "estimate_lipschitz_least_squares",
    "quadratic_term",
    "least_squares_term",
    "power_term",
    "zero_term",
    "zero_regularizer",
    "l1_regularizer",
    "l0_regularizer",
    "scad_regularizer",
    "box_regularizer",
    "regularizer_from_config",
]


@dataclass(frozen=True)
class SmoothTerm:
    """Differentiable term with an L-Lipschitz gradient.

    ``domain_radius`` bounds the box ``[-r, r]^dim`` on which ``lipschitz``
    is valid; ``None`` means the bound holds everywhere.
    """

    dim: int
    value: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray]
    lipschitz: float
    domain_radius: Optional[float] = None
    name: str = "smooth"
    config: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        if int(self.dim) < 1:
            raise InvalidArgumentError(f"dim must be positive, got {self.dim}")
        if not self.lipschitz > 0:
            raise InvalidArgumentError(f"Lipschitz constant must be positive, got {self.lipschitz}")


@dataclass(frozen=True)
class NonsmoothTerm:
    """Lower semicontinuous term exposing one selection of its prox.

    ``prox(x, gamma)`` returns an element of
    ``argmin_p value(p) + ||x - p||^2 / (2 gamma)``.
    """

    dim: int
    value: Callable[[np.ndarray], float]
    prox: Callable[[np.ndarray, float], np.ndarray]
    name: str = "nonsmooth"
    config: dict = field(default_factory=dict, compare=False, repr=False)


@dataclass(frozen=True)
class CompositeProblem:
    f: SmoothTerm
    g: NonsmoothTerm
    kl_exponent: Optional[float] = None

    def __post_init__(self):
        if self.f.dim != self.g.dim:
            raise InvalidArgumentError(
                f"smooth term has dim {self.f.dim} but nonsmooth term has dim {self.g.dim}"
            )
        if self.kl_exponent is not None and not 0 < self.kl_exponent <= 1:
            raise InvalidArgumentError(
                f"KL exponent must lie in (0, 1], got {self.kl_exponent}"
            )

    @property
    def dim(self):
        return self.f.dim

    @property
    def lipschitz(self):
        return self.f.lipschitz


def _as_vector(x, dim):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.ndim != 1 or x.shape[0] != dim:
        raise InvalidArgumentError(f"expected a vector of length {dim}, got shape {x.shape}")
    return x


def objective_value(problem, x):
    """Evaluate ``f(x) + g(x)``; returns ``inf`` outside the domain of g."""
    x = _as_vector(x, problem.dim)
    gval = problem.g.value(x)
    if np.isinf(gval) and gval > 0:
        return float("inf")
    return float(problem.f.value(x)) + float(gval)


def check_gradient(term, x, h=1e-6):
    """Max relative gap between ``term.gradient`` and central differences.

    Each coordinate contributes ``|analytic - fd| / max(1, |analytic|)``.
    """
    if not h > 0:
        raise InvalidArgumentError(f"finite-difference step must be positive, got {h}")
    x = _as_vector(x, term.dim)
    analytic = np.asarray(term.gradient(x), dtype=float)
    fd = np.empty_like(x)
    for i in range(x.shape[0]):
        e = np.zeros_like(x)
        e[i] = h
        fd[i] = (term.value(x + e) - term.value(x - e)) / (2.0 * h)
    return float(np.max(np.abs(analytic - fd) / np.maximum(1.0, np.abs(analytic))))


def estimate_lipschitz_least_squares(A, rtol=1e-8, max_iter=100_000, seed=0):
    """Largest eigenvalue of ``A.T @ A`` by power iteration.

    Stops once the eigen-residual ``||A^T A v - rho v||`` falls below
    ``rtol * rho``; for a symmetric matrix this bounds the eigenvalue error
    by the same relative amount.

    Raises
    ------
    NumericalFailureError
        If the residual test is not met within ``max_iter`` iterations.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if not np.any(A):
        raise InvalidArgumentError("matrix must be nonzero")
    rng = np.random.Generator(np.random.PCG64(seed))
    v = rng.standard_normal(A.shape[1])
    v /= np.linalg.norm(v)
    for _ in range(max_iter):
        with np.errstate(over="ignore", invalid="ignore"):
            w = A.T @ (A @ v)
        rho = float(v @ w)
        if not np.isfinite(rho):
            raise NumericalFailureError("power iteration overflowed; rescale the matrix")
        if np.linalg.norm(w - rho * v) <= rtol * rho:
            return rho
        nw = np.linalg.norm(w)
        if nw == 0:
            # start vector in the null space; restart off it
            v = rng.standard_normal(A.shape[1])
            v /= np.linalg.norm(v)
            continue
        v = w / nw
    raise NumericalFailureError(
        f"power iteration did not reach rtol={rtol} within {max_iter} iterations"
    )


# -- smooth catalog ---------------------------------------------------------


def quadratic_term(dim):
    """``0.5 * ||x||^2`` with L = 1."""
    return SmoothTerm(
        dim=dim,
        value=lambda x: 0.5 * float(x @ x),
        gradient=lambda x: np.array(x, dtype=float),
        lipschitz=1.0,
        name="quadratic",
        config={"type": "quadratic"},
    )


def least_squares_term(A, b, lipschitz=None):
    """``0.5 * ||A x - b||^2``; L defaults to the power-iteration estimate."""
    A = np.array(A, dtype=float)
    b = np.array(b, dtype=float)
    if A.ndim != 2 or b.shape != (A.shape[0],):
        raise InvalidArgumentError(f"incompatible shapes A{A.shape}, b{b.shape}")
    A.setflags(write=False)
    b.setflags(write=False)
    if lipschitz is None:
        lipschitz = estimate_lipschitz_least_squares(A)

    def value(x):
        r = A @ x - b
        return 0.5 * float(r @ r)

    def gradient(x):
        return A.T @ (A @ x - b)

    return SmoothTerm(
        dim=A.shape[1],
        value=value,
        gradient=gradient,
        lipschitz=float(lipschitz),
        name="least_squares",
        config={"type": "least_squares", "A": A, "b": b},
    )


def power_term(p, radius=1.0):
    """``|x|^p`` in one dimension, ``p (p-1) radius^(p-2)``-smooth on the box."""
    if not p >= 2:
        raise InvalidArgumentError(f"power must be at least 2, got {p}")

    def value(x):
        return float(np.sum(np.abs(x) ** p))

    def gradient(x):
        return p * np.sign(x) * np.abs(x) ** (p - 1)

    return SmoothTerm(
        dim=1,
        value=value,
        gradient=gradient,
        lipschitz=p * (p - 1) * radius ** (p - 2),
        domain_radius=radius,
        name=f"power{p:g}",
        config={"type": "power", "p": p, "radius": radius},
    )


def zero_term(dim):
    # L must be positive; any value works for a zero gradient
    return SmoothTerm(
        dim=dim,
        value=lambda x: 0.0,
        gradient=lambda x: np.zeros_like(x, dtype=float),
        lipschitz=1.0,
        name="zero",
        config={"type": "zero"},
    )


# -- nonsmooth catalog ------------------------------------------------------


def zero_regularizer(dim):
    return NonsmoothTerm(
        dim=dim,
        value=lambda x: 0.0,
        prox=lambda x, gamma: np.array(x, dtype=float),
        name="zero",
        config={"type": "zero"},
    )


def l1_regularizer(dim, lam):
    params = _prox.L1Params(lam)
    return NonsmoothTerm(
        dim=dim,
        value=lambda x: _prox.l1_value(params, x),
        prox=lambda x, gamma: _prox.l1_prox(params, x, gamma),
        name="l1",
        config={"type": "l1", "lambda": lam},
    )


def l0_regularizer(dim, lam):
    if not lam > 0:
        raise InvalidArgumentError(f"l0 lambda must be positive, got {lam}")
    return NonsmoothTerm(
        dim=dim,
        value=lambda x: _prox.l0_value(lam, x),
        prox=lambda x, gamma: _prox.l0_prox(lam, x, gamma),
        name="l0",
        config={"type": "l0", "lambda": lam},
    )


def scad_regularizer(dim, lam=1.0, a=5.0):
    params = _prox.ScadParams(lam, a)
    return NonsmoothTerm(
        dim=dim,
        value=lambda x: _prox.scad_value(params, x),
        prox=lambda x, gamma: _prox.scad_prox(params, x, gamma),
        name="scad",
        config={"type": "scad", "lambda": lam, "a": a},
    )


def box_regularizer(dim, radius=1.0):
    if not radius > 0:
        raise InvalidArgumentError(f"box radius must be positive, got {radius}")
    return NonsmoothTerm(
        dim=dim,
        value=lambda x: _prox.box_indicator(radius, x),
        prox=lambda x, gamma: _prox.box_projection(radius, x),
        name="box",
        config={"type": "box", "radius": radius},
    )


def regularizer_from_config(dim, config):
    """Build a nonsmooth term from ``{"type": ..., <parameters>}``."""
    kind = config.get("type")
    if kind == "scad":
        return scad_regularizer(dim, config.get("lambda", 1.0), config.get("a", 5.0))
    if kind == "l1":
        return l1_regularizer(dim, config["lambda"])
    if kind == "l0":
        return l0_regularizer(dim, config["lambda"])
    if kind == "box":
        return box_regularizer(dim, config.get("radius", 1.0))
    if kind == "zero":
        return zero_regularizer(dim)
    raise InvalidArgumentError(
        f"unknown regularizer type {kind!r}; expected one of scad, l1, l0, box, zero"
    )
