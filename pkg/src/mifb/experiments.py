"""Benchmark instances and parameter-set comparisons.

Two families of problems are generated:

* ``poly1d``: ``f(x) = |x|^p`` on ``[-r, r]`` with the box indicator as
  ``g``. Its KL exponent is ``1/p``, so values decay like ``k^(-p/(p-2))``.
* ``scad_ls`` / ``l1_ls``: ``0.5 ||Ax - b||^2`` plus a separable SCAD or
  l1 penalty, ``b = A x_true`` with a sparse Gaussian ``x_true``. Both have
  KL exponent 1/2, so values converge at least linearly. SCAD can also stop
  in finitely many steps when the limit is a sharp minimizer such as 0.

Random draws come from NumPy's PCG64 bit generator seeded with the
instance seed, in this order: ``A`` (row-major standard normals scaled by
``sqrt(noise_scale)``), the support of ``x_true`` (``Generator.choice``
without replacement), its values, then the starting point.
"""

import csv
import dataclasses
import io
import json
import os
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import diagnostics
from .exceptions import InvalidArgumentError, MifbError
from .problem import (
    CompositeProblem,
    box_regularizer,
    least_squares_term,
    power_term,
    regularizer_from_config,
)
from .solver import params_to_dict, preset, solve

__all__ = [
    "SCHEMA_VERSION",
    "SUITES",
    "InstanceSpec",
    "Instance",
    "ComparisonRun",
    "gen_poly1d",
    "gen_sparse_ls",
    "build_instance",
    "instance_to_dict",
    "instance_from_dict",
    "builtin_run",
    "run_comparison",
    "export_results",
    "summary_dict",
    "write_trace_csv",
]

SCHEMA_VERSION = 1
SUITES = ("poly-p4", "poly-p18", "scad-ls", "l1-ls")
KINDS = ("poly1d", "scad_ls", "l1_ls", "least_squares")
CSV_COLUMNS = ("k", "phi", "phi_gap", "delta_x", "psi")


@dataclass(frozen=True)
class InstanceSpec:
    """Recipe for a benchmark problem.

    ``reg`` is the regularizer config for least squares
    (``{"type": "scad", "lambda": 1, "a": 5}`` etc.); ``p``/``radius``/``x0``
    describe ``poly1d``.
    """

    kind: str
    seed: int = 42
    m: int = 50
    n: int = 100
    sparsity: int = 5
    noise_scale: float = 1e-2
    reg: dict = field(default_factory=dict)
    p: float = 4.0
    radius: float = 1.0
    x0: float = 0.9
    start_scale: float = 1.0

    def __post_init__(self):
        if self.kind not in ("poly1d", "scad_ls", "l1_ls"):
            raise InvalidArgumentError(f"unknown instance kind {self.kind!r}")
        if self.kind == "poly1d":
            if not self.p > 2:
                raise InvalidArgumentError(f"poly1d needs p > 2, got {self.p}")
            if not self.radius > 0:
                raise InvalidArgumentError(f"radius must be positive, got {self.radius}")
        else:
            if self.m < 1 or self.n < 1:
                raise InvalidArgumentError(f"dimensions must be positive, got {self.m}x{self.n}")
            if not 0 < self.sparsity <= self.n:
                raise InvalidArgumentError(
                    f"sparsity must lie in [1, n={self.n}], got {self.sparsity}"
                )
            if not self.noise_scale > 0:
                raise InvalidArgumentError(f"noise_scale must be positive, got {self.noise_scale}")

    @classmethod
    def desk(cls, kind, **kw):
        reg = {"scad_ls": {"type": "scad", "lambda": 1.0, "a": 5.0},
               "l1_ls": {"type": "l1", "lambda": 0.01}}.get(kind, {})
        return cls(kind=kind, reg=kw.pop("reg", reg), **kw)

    @classmethod
    def full(cls, kind, **kw):
        if kind == "poly1d":
            return cls.desk(kind, **kw)
        return cls.desk(kind, m=500, n=1000, sparsity=50, noise_scale=1e-4, **kw)

    def to_dict(self):
        d = dataclasses.asdict(self)
        if self.kind == "poly1d":
            for key in ("m", "n", "sparsity", "noise_scale", "reg", "start_scale"):
                d.pop(key)
        else:
            for key in ("p", "radius", "x0"):
                d.pop(key)
        return d


@dataclass(frozen=True)
class Instance:
    problem: CompositeProblem
    x_start: np.ndarray
    spec: Optional[InstanceSpec] = None
    x_true: Optional[np.ndarray] = None
    b: Optional[np.ndarray] = None
    phi_star: Optional[float] = None


def gen_poly1d(p, radius=1.0):
    """``|x|^p`` restricted to ``[-radius, radius]``."""
    if not p > 2:
        raise InvalidArgumentError(f"poly1d needs p > 2, got {p}")
    return CompositeProblem(power_term(p, radius), box_regularizer(1, radius), kl_exponent=1.0 / p)


def _draw_sparse_ls(spec):
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    A = rng.standard_normal((spec.m, spec.n)) * np.sqrt(spec.noise_scale)
    support = rng.choice(spec.n, size=spec.sparsity, replace=False)
    x_true = np.zeros(spec.n)
    x_true[support] = rng.standard_normal(spec.sparsity)
    start = rng.standard_normal(spec.n) * spec.start_scale
    return A, x_true, start


def gen_sparse_ls(spec):
    """Seeded sparse least-squares instance; returns ``(problem, x_true, b)``."""
    if spec.kind not in ("scad_ls", "l1_ls"):
        raise InvalidArgumentError(f"gen_sparse_ls needs scad_ls or l1_ls, got {spec.kind!r}")
    A, x_true, _ = _draw_sparse_ls(spec)
    b = A @ x_true
    reg = dict(spec.reg) or InstanceSpec.desk(spec.kind).reg
    expected = "scad" if spec.kind == "scad_ls" else "l1"
    if reg.get("type") != expected:
        raise InvalidArgumentError(f"{spec.kind} needs a {expected} regularizer, got {reg}")
    problem = CompositeProblem(
        least_squares_term(A, b), regularizer_from_config(spec.n, reg), kl_exponent=0.5
    )
    return problem, x_true, b


def build_instance(spec):
    if spec.kind == "poly1d":
        return Instance(
            problem=gen_poly1d(spec.p, spec.radius),
            x_start=np.array([spec.x0]),
            spec=spec,
            phi_star=0.0,
        )
    problem, x_true, b = gen_sparse_ls(spec)
    _, _, start = _draw_sparse_ls(spec)
    return Instance(problem=problem, x_start=start, spec=spec, x_true=x_true, b=b)


def instance_to_dict(inst):
    """JSON document for an instance; matrices are row-major nested lists."""
    d = {"schema_version": SCHEMA_VERSION}
    f_cfg = inst.problem.f.config
    if inst.spec is not None:
        d["spec"] = inst.spec.to_dict()
        d["kind"] = inst.spec.kind
        d["seed"] = inst.spec.seed
    if f_cfg.get("type") == "least_squares":
        d.setdefault("kind", "least_squares")
        d["A"] = np.asarray(f_cfg["A"]).tolist()
        d["b"] = np.asarray(f_cfg["b"]).tolist()
        d["lipschitz"] = inst.problem.lipschitz
        d["regularizer"] = dict(inst.problem.g.config)
    elif f_cfg.get("type") == "power":
        d.setdefault("kind", "poly1d")
        d["p"] = f_cfg["p"]
        d["radius"] = f_cfg["radius"]
    else:
        raise InvalidArgumentError(f"smooth term {inst.problem.f.name!r} is not serializable")
    d["x0"] = np.asarray(inst.x_start).tolist()
    if inst.x_true is not None:
        d["x_true"] = np.asarray(inst.x_true).tolist()
    d["kl_exponent"] = inst.problem.kl_exponent
    d["phi_star"] = inst.phi_star
    return d


def instance_from_dict(d):
    """Inverse of :func:`instance_to_dict`; also accepts hand-written documents.

    A document needs ``kind`` and either ``p``/``radius`` (poly1d) or
    ``A``/``b``/``regularizer``; ``x0`` is the starting point. A seeded
    ``spec`` without ``A`` is regenerated from its seed.
    """
    try:
        kind = d.get("kind")
        if kind not in KINDS:
            raise InvalidArgumentError(f"unknown instance kind {kind!r}; expected one of {KINDS}")
        spec = InstanceSpec(**d["spec"]) if "spec" in d else None
        if kind == "poly1d":
            p, radius = float(d.get("p", 4.0)), float(d.get("radius", 1.0))
            x0 = d.get("x0", [0.9])
            return Instance(
                problem=gen_poly1d(p, radius),
                x_start=np.atleast_1d(np.asarray(x0, dtype=float)),
                spec=spec,
                phi_star=d.get("phi_star", 0.0),
            )
        if "A" not in d and spec is not None:
            return build_instance(spec)
        A = np.asarray(d["A"], dtype=float)
        b = np.asarray(d["b"], dtype=float)
        f = least_squares_term(A, b, lipschitz=d.get("lipschitz"))
        g = regularizer_from_config(A.shape[1], d["regularizer"])
        problem = CompositeProblem(f, g, kl_exponent=d.get("kl_exponent"))
        x0 = np.asarray(d["x0"], dtype=float) if "x0" in d else np.zeros(A.shape[1])
        x_true = np.asarray(d["x_true"], dtype=float) if "x_true" in d else None
        return Instance(problem=problem, x_start=x0, spec=spec, x_true=x_true, b=b,
                        phi_star=d.get("phi_star"))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, MifbError):
            raise
        raise InvalidArgumentError(f"malformed instance document: {exc}") from exc


@dataclass
class ComparisonRun:
    """A set of named parameter choices solved from one shared start.

    ``forced`` names the parameter sets allowed to run without a positive
    margin. ``phi_star`` is the known optimal value when there is one;
    otherwise each run's limit is estimated from its own trace after
    ``burn_iters`` iterations.
    """

    instance: Instance
    param_sets: list
    forced: frozenset = frozenset()
    burn_iters: int = 2000
    tail_fraction: float = 0.5
    phi_star: Optional[float] = None
    label: str = ""
    traces: dict = field(default_factory=dict)
    phi_stars: dict = field(default_factory=dict)
    reports: dict = field(default_factory=dict)
    iterate_reports: dict = field(default_factory=dict)
    errors: dict = field(default_factory=dict)

    @property
    def names(self):
        return [p.name for p in self.param_sets]


def _suite_param_sets(suite, full):
    if suite in ("poly-p4", "poly-p18"):
        common = dict(gamma_fraction=0.5, max_iters=10_000)
        sets = [
            preset("none", **common),
            preset("ifb-equal", inertia=0.3, **common),
            preset("two-step", inertia=(0.3, 0.1), **common),
        ]
        # the 0.3 inertia runs of the polynomial figure are outside the
        # delta > 0 certificate at gamma = 0.5/L
        return sets, frozenset({"ifb-equal", "two-step"})
    fraction = 0.1 if suite == "scad-ls" else 1.0 - 1e-6
    common = dict(gamma_fraction=fraction, max_iters=1000 if full else 2000)
    sets = [
        preset("none", **common),
        preset("ifb-equal", inertia=0.3, **common),
        preset("ipiano", inertia=0.3, **common),
        preset("two-step", inertia=(0.2, 0.1), **common),
    ]
    if suite == "l1-ls":
        # gamma ~ 1/L leaves beta negative: no parameter set is certified
        return sets, frozenset(p.name for p in sets)
    return sets, frozenset()


def builtin_run(suite, seed=42, full=False, max_iters=None, tol=None):
    """The comparison behind one of :data:`SUITES`."""
    if suite not in SUITES:
        raise InvalidArgumentError(f"unknown suite {suite!r}; expected one of {', '.join(SUITES)}")
    if suite.startswith("poly"):
        spec = InstanceSpec.desk("poly1d", seed=seed, p=4.0 if suite == "poly-p4" else 18.0)
    else:
        kind = "scad_ls" if suite == "scad-ls" else "l1_ls"
        spec = (InstanceSpec.full if full else InstanceSpec.desk)(kind, seed=seed)
    inst = build_instance(spec)
    sets, forced = _suite_param_sets(suite, full)
    if max_iters is not None or tol is not None:
        sets = [
            p.replace(
                max_iters=p.max_iters if max_iters is None else max_iters,
                tol_delta_x=p.tol_delta_x if tol is None else tol,
            )
            for p in sets
        ]
    burn = max(p.max_iters for p in sets)
    return ComparisonRun(
        instance=inst,
        param_sets=sets,
        forced=forced,
        burn_iters=burn,
        phi_star=inst.phi_star,
        label=suite,
    )


def _threads():
    try:
        return max(1, int(os.environ.get("MIFB_THREADS", "1")))
    except ValueError:
        return 1


def run_comparison(run, threads=None):
    """Solve every parameter set and attach rate reports.

    Runs are independent; up to ``MIFB_THREADS`` (default 1) execute in
    parallel threads. Results are identical for any thread count.
    """
    inst = run.instance
    names = run.names
    if len(set(names)) != len(names):
        raise InvalidArgumentError(f"parameter set names must be unique, got {names}")
    theta = inst.problem.kl_exponent

    def one(params):
        try:
            return solve(inst.problem, params, inst.x_start, force=params.name in run.forced)
        except MifbError as exc:
            raise type(exc)(f"parameter set {params.name!r}: {exc}") from exc

    threads = _threads() if threads is None else threads
    if threads > 1 and len(run.param_sets) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            traces = list(pool.map(one, run.param_sets))
    else:
        traces = [one(p) for p in run.param_sets]

    out = dataclasses.replace(run, traces={}, phi_stars={}, reports={}, iterate_reports={}, errors={})
    for params, tr in zip(run.param_sets, traces):
        name = params.name
        out.traces[name] = tr
        if run.phi_star is not None:
            ps = float(run.phi_star)
        else:
            ps = diagnostics.estimate_phi_star(tr.phi, min(run.burn_iters, len(tr.phi)))
        out.phi_stars[name] = ps
        try:
            out.reports[name] = diagnostics.trace_rate_report(
                tr.k, tr.phi, ps, theta=theta, tail_fraction=run.tail_fraction
            )
        except MifbError as exc:
            out.errors[name] = str(exc)
        if len(tr.iterate_index) > 2:
            try:
                out.iterate_reports[name] = diagnostics.iterate_rate_report(
                    tr.iterate_index, tr.iterates, theta=theta, tail_fraction=run.tail_fraction
                )
            except MifbError:
                pass
    return out


def _fmt(v):
    return repr(float(v))


def write_trace_csv(stream, trace, phi_star):
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    if trace is None:
        return
    for k in range(len(trace.phi)):
        phi = trace.phi[k]
        w.writerow([k, _fmt(phi), _fmt(phi - phi_star), _fmt(trace.delta_x[k]), _fmt(trace.psi[k])])


def summary_dict(run):
    """JSON-ready summary of a filled comparison."""
    inst = run.instance
    runs = {}
    for params in run.param_sets:
        name = params.name
        tr = run.traces.get(name)
        entry = {"params": params_to_dict(tr.params if tr is not None else params),
                 "forced": name in run.forced}
        if tr is not None:
            entry.update(
                admissibility=tr.admissibility.to_dict(),
                termination=tr.reason,
                message=tr.message,
                n_iter=tr.n_iter,
                phi_final=float(tr.phi[-1]),
                phi_star=run.phi_stars.get(name),
                descent_violations=tr.descent_violations,
            )
        if name in run.reports:
            entry["rate"] = run.reports[name].to_dict()
        if name in run.iterate_reports:
            entry["iterate_rate"] = run.iterate_reports[name].to_dict()
        if name in run.errors:
            entry["rate_error"] = run.errors[name]
        runs[name] = entry
    theta = inst.problem.kl_exponent
    pred = diagnostics.predict_regime(theta) if theta is not None else (None, None)
    return {
        "schema_version": SCHEMA_VERSION,
        "label": run.label,
        "instance": inst.spec.to_dict() if inst.spec is not None else None,
        "seed": inst.spec.seed if inst.spec is not None else None,
        "lipschitz": inst.problem.lipschitz,
        "kl_exponent": theta,
        "predicted_regime": pred[0],
        "predicted_exponent": pred[1],
        "burn_iters": run.burn_iters,
        "tail_fraction": run.tail_fraction,
        "parameter_sets_note": "inertia values are admissibility-checked stand-ins",
        "runs": runs,
    }


def atomic_write_text(path, text):
    """Write via a temporary file in the same directory, then rename."""
    path = os.fspath(path)
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def export_results(run, path):
    """Write ``trace_<name>.csv`` per parameter set and ``summary.json``.

    Output is byte-identical for identical inputs. Returns the written paths.
    """
    try:
        os.makedirs(path, exist_ok=True)
        written = []
        for params in run.param_sets:
            name = params.name
            buf = io.StringIO()
            write_trace_csv(buf, run.traces.get(name), run.phi_stars.get(name, 0.0))
            target = os.path.join(path, f"trace_{name}.csv")
            atomic_write_text(target, buf.getvalue())
            written.append(target)
        target = os.path.join(path, "summary.json")
        atomic_write_text(target, json.dumps(summary_dict(run), indent=2, sort_keys=True) + "\n")
        written.append(target)
        return written
    except OSError as exc:
        raise OSError(f"could not write results to {path}: {exc}") from exc
