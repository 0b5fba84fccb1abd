"""Multi-step inertial forward-backward splitting.

Each iteration extrapolates twice from the last ``s`` iterate differences,

    y_a = x_k + sum_i a_{k,i} (x_{k-i} - x_{k-i-1})
    y_b = x_k + sum_i b_{k,i} (x_{k-i} - x_{k-i-1})
    x_{k+1} = prox_{gamma_k g}(y_a - gamma_k grad f(y_b))

and the parameters are gated by the margin ``delta = beta_inf - sum(alpha_sup)``
which, when positive, makes the Lyapunov sequence decrease by at least
``delta * ||x_{k+1} - x_k||^2`` per step.

Schedules (``gamma``, ``a``, ``b``) are evaluated at the 1-based iteration
number ``k``: iteration ``k`` maps ``x_{k-1}`` history to ``x_k``.
"""

import dataclasses
import itertools
import logging
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from . import diagnostics
from .exceptions import (
    InvalidArgumentError,
    InvalidParameterError,
    NumericalFailureError,
)
from .problem import objective_value

__all__ = [
    "MifbParams",
    "AdmissibilityReport",
    "SolverState",
    "IterateRecord",
    "SolveTrace",
    "PRESETS",
    "MU_NU_GRID",
    "preset",
    "compute_admissibility",
    "select_mu_nu",
    "resolve_params",
    "initial_state",
    "mifb_step",
    "solve",
    "params_to_dict",
    "params_from_dict",
]

logger = logging.getLogger(__name__)

PRESETS = ("none", "heavy-ball", "ipiano", "ifb-equal", "two-step")
MU_NU_GRID = (0.01, 0.05, 0.1, 0.2, 0.4)

Schedule = Union[float, Callable[[int], float]]
InertiaSchedule = Union[np.ndarray, Callable[[int], np.ndarray]]


@dataclass(frozen=True)
class MifbParams:
    """Inertia depth, schedules and auxiliary constants.

    Parameters
    ----------
    s : int
        Number of inertial terms.
    a, b : array_like or callable
        Inertia for the prox anchor (``a``) and the gradient point (``b``).
        Either a length-``s`` vector used at every iteration, a
        ``(rows, s)`` array whose row ``k-1`` is used at iteration ``k``
        (the last row repeats), or a callable ``k -> vector``.
    gamma : float or callable, optional
        Stepsize. Ignored when ``gamma_fraction`` is set.
    gamma_fraction : float, optional
        Stepsize given as a fraction of ``1/L``, resolved against the
        problem at solve time.
    mu, nu : float, optional
        Auxiliary constants of the descent certificate. ``None`` selects
        them by grid search to maximize the margin.
    max_iters : int
    tol_delta_x : float
        Stop once ``||x_k - x_{k-1}|| <= tol_delta_x``.
    """

    s: int = 1
    a: InertiaSchedule = field(default_factory=lambda: np.zeros(1))
    b: InertiaSchedule = field(default_factory=lambda: np.zeros(1))
    gamma: Optional[Schedule] = None
    gamma_fraction: Optional[float] = None
    mu: Optional[float] = None
    nu: Optional[float] = None
    max_iters: int = 1000
    tol_delta_x: float = 1e-10
    name: str = "custom"

    def __post_init__(self):
        if int(self.s) < 1:
            raise InvalidArgumentError(f"inertia depth s must be >= 1, got {self.s}")
        object.__setattr__(self, "s", int(self.s))
        for label in ("a", "b"):
            sched = getattr(self, label)
            if callable(sched):
                continue
            arr = np.array(sched, dtype=float)
            if arr.ndim == 0:
                arr = np.full(self.s, float(arr))
            if arr.shape[-1] != self.s or arr.ndim > 2:
                raise InvalidArgumentError(
                    f"{label} must have trailing length s={self.s}, got shape {arr.shape}"
                )
            _check_inertia_range(label, arr)
            arr.setflags(write=False)
            object.__setattr__(self, label, arr)
        if self.gamma is None and self.gamma_fraction is None:
            raise InvalidArgumentError("one of gamma or gamma_fraction is required")
        if self.gamma_fraction is not None and not 0 < self.gamma_fraction < 1:
            raise InvalidParameterError(
                f"gamma_fraction must lie in (0, 1), got {self.gamma_fraction}"
            )
        for label in ("mu", "nu"):
            v = getattr(self, label)
            if v is not None and not v > 0:
                raise InvalidArgumentError(f"{label} must be positive, got {v}")
        if int(self.max_iters) < 1:
            raise InvalidArgumentError(f"max_iters must be positive, got {self.max_iters}")
        if not self.tol_delta_x >= 0:
            raise InvalidArgumentError(f"tol_delta_x must be nonnegative, got {self.tol_delta_x}")

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def gamma_at(self, k, lipschitz=None):
        if self.gamma_fraction is not None:
            if lipschitz is None:
                raise InvalidArgumentError("gamma_fraction needs the Lipschitz constant")
            return self.gamma_fraction / lipschitz
        if callable(self.gamma):
            return float(self.gamma(k))
        return float(self.gamma)

    def a_at(self, k):
        return _inertia_at(self.a, k, self.s, "a")

    def b_at(self, k):
        return _inertia_at(self.b, k, self.s, "b")

    @property
    def is_constant(self):
        """True when every schedule is the same at all iterations."""
        if callable(self.gamma) and self.gamma_fraction is None:
            return False
        return all(
            not callable(m) and (m.ndim == 1 or m.shape[0] == 1) for m in (self.a, self.b)
        )

    @property
    def n_schedule_rows(self):
        """Number of distinct rows of tabulated schedules, None when callable."""
        if (callable(self.gamma) and self.gamma_fraction is None) or callable(self.a) or callable(self.b):
            return None
        return max(1 if m.ndim == 1 else m.shape[0] for m in (self.a, self.b))


def _check_inertia_range(label, arr, k=None):
    if np.any(arr <= -1) or np.any(arr > 1) or not np.all(np.isfinite(arr)):
        where = "" if k is None else f" at iteration {k}"
        raise InvalidParameterError(
            f"inertia {label}{where} must lie in (-1, 1], got {np.asarray(arr).tolist()}",
            index=k,
        )


def _inertia_at(sched, k, s, label):
    if callable(sched):
        v = np.asarray(sched(k), dtype=float).reshape(-1)
        if v.shape[0] != s:
            raise InvalidArgumentError(f"schedule {label}({k}) has length {v.shape[0]}, expected {s}")
        _check_inertia_range(label, v, k)
        return v
    if sched.ndim == 1:
        return sched
    return sched[min(k - 1, sched.shape[0] - 1)]


def preset(name, /, inertia=None, inertia_b=None, **overrides):
    """Parameter template for a named special case.

    ``inertia`` fills the user-set row: a scalar for the one-step presets
    (default 0.3), a length-2 vector for ``"two-step"`` (default
    ``(0.3, 0.1)``). ``inertia_b`` sets the gradient-point row of
    ``"two-step"`` and defaults to ``inertia``. Remaining keyword arguments
    are forwarded to :class:`MifbParams` (``name=`` relabels the result);
    without a ``gamma`` or ``gamma_fraction`` the stepsize defaults to
    ``0.5 / L``.
    """
    if name not in PRESETS:
        raise InvalidArgumentError(
            f"unknown preset {name!r}; valid presets: {', '.join(PRESETS)}"
        )
    if name == "none":
        s, a, b = 1, [0.0], [0.0]
    elif name in ("heavy-ball", "ipiano"):
        s, a, b = 1, [0.3 if inertia is None else float(inertia)], [0.0]
    elif name == "ifb-equal":
        v = 0.3 if inertia is None else float(inertia)
        s, a, b = 1, [v], [v]
    else:
        a = [0.3, 0.1] if inertia is None else [float(t) for t in np.ravel(inertia)]
        b = a if inertia_b is None else [float(t) for t in np.ravel(inertia_b)]
        s = 2
    overrides.setdefault("gamma_fraction", None if "gamma" in overrides else 0.5)
    overrides.setdefault("name", name)
    return MifbParams(s=s, a=np.array(a), b=np.array(b), **overrides)


@dataclass(frozen=True)
class AdmissibilityReport:
    beta_inf: float
    alpha_sup: np.ndarray
    delta: float
    admissible: bool
    mu: float
    nu: float
    lipschitz: float
    horizon: int

    def to_dict(self):
        return {
            "beta_inf": self.beta_inf,
            "alpha_sup": [float(v) for v in self.alpha_sup],
            "delta": self.delta,
            "admissible": self.admissible,
            "mu": self.mu,
            "nu": self.nu,
            "lipschitz": self.lipschitz,
            "horizon": self.horizon,
        }


def _schedule_table(params, lipschitz, horizon):
    """Stepsizes and inertia rows over the iterations that can differ."""
    if params.is_constant:
        ks = [1]
    else:
        rows = params.n_schedule_rows
        ks = range(1, (horizon if rows is None else min(horizon, rows)) + 1)
    gammas, a_rows, b_rows = [], [], []
    for k in ks:
        g = params.gamma_at(k, lipschitz)
        if not 0 < g < 1.0 / lipschitz:
            raise InvalidParameterError(
                f"stepsize gamma_{k} = {g!r} is outside (0, 1/L) = (0, {1.0 / lipschitz!r})",
                index=k,
            )
        gammas.append(g)
        a_rows.append(params.a_at(k))
        b_rows.append(params.b_at(k))
    return np.array(gammas), np.array(a_rows), np.array(b_rows)


def _margin(gammas, a_rows, b_rows, s, lipschitz, mu, nu):
    beta = (1.0 - gammas * lipschitz - mu - nu * gammas) / (2.0 * gammas)
    alpha = (
        s * a_rows**2 / (2.0 * gammas[:, None] * mu)
        + s * b_rows**2 * lipschitz**2 / (2.0 * nu)
    )
    beta_inf = float(beta.min())
    alpha_sup = alpha.max(axis=0)
    return beta_inf, alpha_sup, beta_inf - float(np.sum(alpha_sup))


def select_mu_nu(params, lipschitz, horizon=None, grid=MU_NU_GRID):
    """Grid-search ``(mu, nu)`` for the largest margin.

    ``nu`` carries the units of ``L`` (it is multiplied by a stepsize), so
    its candidates are the grid values and the same values scaled by ``L``.
    First best wins on ties, scanning the grid in order.
    """
    horizon = params.max_iters if horizon is None else horizon
    table = _schedule_table(params, lipschitz, horizon)
    mus = grid if params.mu is None else (params.mu,)
    if params.nu is None:
        nus = tuple(grid) + tuple(v * lipschitz for v in grid if lipschitz != 1.0)
    else:
        nus = (params.nu,)
    best = None
    for mu, nu in itertools.product(mus, nus):
        d = _margin(*table, params.s, lipschitz, mu, nu)[2]
        if best is None or d > best[0]:
            best = (d, mu, nu)
    return best[1], best[2]


def resolve_params(params, lipschitz, horizon=None):
    """Fill ``mu``/``nu`` by grid search when unset."""
    if params.mu is not None and params.nu is not None:
        return params
    mu, nu = select_mu_nu(params, lipschitz, horizon)
    return params.replace(mu=mu, nu=nu)


def compute_admissibility(params, lipschitz, horizon=None):
    """Margin ``delta = beta_inf - sum_i alpha_sup_i`` over a finite horizon.

    ``beta_k = (1 - gamma_k L - mu - nu gamma_k) / (2 gamma_k)`` and
    ``alpha_{k,i} = s a_{k,i}^2 / (2 gamma_k mu) + s b_{k,i}^2 L^2 / (2 nu)``.
    The lim inf and lim sup become min and max over ``k = 1..horizon``
    (default ``max_iters``); constant schedules are evaluated once.

    Raises
    ------
    InvalidParameterError
        If some ``gamma_k`` lies outside ``(0, 1/L)``.
    """
    if not lipschitz > 0:
        raise InvalidArgumentError(f"Lipschitz constant must be positive, got {lipschitz}")
    horizon = params.max_iters if horizon is None else int(horizon)
    if horizon < 1:
        raise InvalidArgumentError(f"horizon must be positive, got {horizon}")
    params = resolve_params(params, lipschitz, horizon)
    table = _schedule_table(params, lipschitz, horizon)
    beta_inf, alpha_sup, delta = _margin(*table, params.s, lipschitz, params.mu, params.nu)
    alpha_sup.setflags(write=False)
    return AdmissibilityReport(
        beta_inf=beta_inf,
        alpha_sup=alpha_sup,
        delta=delta,
        admissible=bool(delta > 0),
        mu=params.mu,
        nu=params.nu,
        lipschitz=float(lipschitz),
        horizon=horizon,
    )


@dataclass(frozen=True)
class SolverState:
    """Iterate window ``(x_k, x_{k-1}, ..., x_{k-s})`` and recent steps.

    ``deltas[i]`` is ``||x_{k-i} - x_{k-i-1}||`` for ``i = 0..s-1``.
    """

    history: tuple
    k: int
    deltas: tuple

    @property
    def x(self):
        return self.history[0]


@dataclass(frozen=True)
class IterateRecord:
    k: int
    x: np.ndarray
    delta_x: float
    phi: float


def initial_state(x0, s):
    x0 = np.array(x0, dtype=float)
    return SolverState(history=(x0,) * (s + 1), k=0, deltas=(0.0,) * s)


def mifb_step(problem, params, state, lipschitz=None):
    """Advance one iteration; returns ``(new_state, record)``."""
    k = state.k + 1
    lipschitz = problem.lipschitz if lipschitz is None else lipschitz
    gamma = params.gamma_at(k, lipschitz)
    a = params.a_at(k)
    b = params.b_at(k)
    hist = state.history
    x = hist[0]
    y_a = x.copy()
    y_b = x.copy()
    for i in range(params.s):
        d = hist[i] - hist[i + 1]
        if a[i] != 0:
            y_a += a[i] * d
        if b[i] != 0:
            y_b += b[i] * d
    grad = problem.f.gradient(y_b)
    if not np.all(np.isfinite(grad)):
        raise NumericalFailureError(f"non-finite gradient at iteration {k}", iteration=k)
    x_new = np.asarray(problem.g.prox(y_a - gamma * grad, gamma), dtype=float)
    if not np.all(np.isfinite(x_new)):
        raise NumericalFailureError(f"non-finite prox output at iteration {k}", iteration=k)
    step = float(np.linalg.norm(x_new - x))
    new_state = SolverState(
        history=(x_new,) + hist[:-1],
        k=k,
        deltas=(step,) + state.deltas[:-1],
    )
    return new_state, IterateRecord(k=k, x=x_new, delta_x=step, phi=objective_value(problem, x_new))


@dataclass
class SolveTrace:
    """Dense per-iteration record of a run, index ``k = 0..n_iter``.

    ``phi``, ``delta_x`` and ``psi`` are always stored for every iteration;
    ``iterates`` holds ``x_k`` for the indices in ``iterate_index`` only.
    """

    phi: np.ndarray
    delta_x: np.ndarray
    psi: np.ndarray
    iterates: np.ndarray
    iterate_index: np.ndarray
    x_final: np.ndarray
    reason: str
    message: str
    params: MifbParams
    admissibility: AdmissibilityReport
    forced: bool
    descent_violations: Optional[list] = None

    @property
    def n_iter(self):
        return len(self.phi) - 1

    @property
    def k(self):
        return np.arange(len(self.phi))


def solve(problem, params, x0, force=False, keep_iterates=1, horizon=None):
    """Run MiFB from ``x0`` until ``delta_x <= tol_delta_x`` or ``max_iters``.

    Parameters
    ----------
    problem : CompositeProblem
    params : MifbParams
    x0 : array_like
    force : bool
        Run even when the margin is not positive. The descent check is
        then skipped.
    keep_iterates : int
        Store every ``keep_iterates``-th iterate (0 stores only the ends).
    horizon : int, optional
        Horizon for the admissibility bounds, default ``max_iters``.

    Returns
    -------
    SolveTrace
        ``reason`` is one of ``"tolerance"``, ``"max_iters"``,
        ``"numerical_failure"``.
    """
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    if x0.shape != (problem.dim,):
        raise InvalidArgumentError(f"x0 has shape {x0.shape}, expected ({problem.dim},)")
    L = problem.lipschitz
    report = compute_admissibility(params, L, horizon)
    params = params.replace(mu=report.mu, nu=report.nu)
    if not report.admissible and not force:
        raise InvalidParameterError(
            f"parameters are not admissible (delta = {report.delta:.6g} <= 0); "
            "pass force=True to run anyway"
        )
    weights = diagnostics.lyapunov_weights(report.alpha_sup)

    state = initial_state(x0, params.s)
    phi = [objective_value(problem, x0)]
    dx = [0.0]
    psi = [diagnostics.lyapunov_value(state.deltas, phi[0], weights)]
    kept, kept_idx = [x0], [0]
    reason, message = "max_iters", ""
    for _ in range(params.max_iters):
        try:
            state, rec = mifb_step(problem, params, state, L)
        except NumericalFailureError as exc:
            reason, message = "numerical_failure", str(exc)
            logger.warning("%s", exc)
            break
        phi.append(rec.phi)
        dx.append(rec.delta_x)
        psi.append(diagnostics.lyapunov_value(state.deltas, rec.phi, weights))
        if keep_iterates and rec.k % keep_iterates == 0:
            kept.append(rec.x)
            kept_idx.append(rec.k)
        if rec.delta_x <= params.tol_delta_x:
            reason = "tolerance"
            break
    if kept_idx[-1] != state.k:
        kept.append(state.x)
        kept_idx.append(state.k)

    trace = SolveTrace(
        phi=np.array(phi),
        delta_x=np.array(dx),
        psi=np.array(psi),
        iterates=np.array(kept),
        iterate_index=np.array(kept_idx),
        x_final=state.x,
        reason=reason,
        message=message,
        params=params,
        admissibility=report,
        forced=not report.admissible,
    )
    if report.admissible:
        trace.descent_violations = diagnostics.check_descent(trace.psi, report.delta, trace.delta_x)
        if trace.descent_violations:
            logger.warning(
                "descent inequality violated at %d iterations", len(trace.descent_violations)
            )
    return trace


def params_to_dict(params):
    """JSON form; only constant and tabulated schedules are serializable."""
    if callable(params.a) or callable(params.b) or (
        callable(params.gamma) and params.gamma_fraction is None
    ):
        raise InvalidArgumentError("callable schedules cannot be serialized")
    if params.gamma_fraction is not None:
        gamma = {"type": "lipschitz_fraction", "value": params.gamma_fraction}
    else:
        gamma = {"type": "constant", "value": float(params.gamma)}
    return {
        "name": params.name,
        "s": params.s,
        "mu": params.mu,
        "nu": params.nu,
        "gamma": gamma,
        "a": np.atleast_2d(params.a).tolist(),
        "b": np.atleast_2d(params.b).tolist(),
        "max_iters": params.max_iters,
        "tol": params.tol_delta_x,
    }


def params_from_dict(d):
    try:
        gamma = d["gamma"]
        kind = gamma.get("type", "constant")
        kw = {}
        if kind == "constant":
            kw["gamma"] = float(gamma["value"])
        elif kind == "lipschitz_fraction":
            kw["gamma_fraction"] = float(gamma["value"])
        else:
            raise InvalidArgumentError(f"unknown gamma schedule type {kind!r}")
        a = np.array(d["a"], dtype=float)
        b = np.array(d.get("b", np.zeros_like(a)), dtype=float)
        return MifbParams(
            s=int(d.get("s", a.shape[-1])),
            a=a[0] if a.ndim == 2 and a.shape[0] == 1 else a,
            b=b[0] if b.ndim == 2 and b.shape[0] == 1 else b,
            mu=d.get("mu"),
            nu=d.get("nu"),
            max_iters=int(d.get("max_iters", 1000)),
            tol_delta_x=float(d.get("tol", 1e-10)),
            name=d.get("name", "custom"),
            **kw,
        )
    except (KeyError, TypeError) as exc:
        raise InvalidArgumentError(f"malformed parameter document: {exc}") from exc
