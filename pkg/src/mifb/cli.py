"""Command-line interface: ``mifb {validate,solve,reproduce,fit}``.

Exit codes
----------
0  success (admissible / converged to tolerance / all regimes match)
1  not admissible, or a reproduced regime misses its prediction
2  bad input: unreadable file, malformed document, invalid parameters
3  ``solve`` stopped at ``max_iters``
4  numerical failure (during ``solve``, or while estimating L)
"""

import argparse
import csv
import json
import logging
import sys

import numpy as np

from . import diagnostics, experiments
from .exceptions import MifbError, NumericalFailureError
from .solver import PRESETS, compute_admissibility, params_from_dict, preset

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_INPUT = 2
EXIT_MAX_ITERS = 3
EXIT_NUMERICAL = 4

# Fitted power exponents must land in these intervals; other suites only
# need the right regime. l1 additionally requires R^2 >= 0.98.
EXPONENT_BANDS = {"poly-p4": (-2.3, -1.7), "poly-p18": (-1.35, -0.95)}
MIN_LINEAR_R2 = {"l1-ls": 0.98}

_INSTANCE_BUILTINS = {
    "poly-p4": ("poly1d", {"p": 4.0}),
    "poly-p18": ("poly1d", {"p": 18.0}),
    "scad-ls": ("scad_ls", {}),
    "l1-ls": ("l1_ls", {}),
}


class UsageError(Exception):
    pass


def _read_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path} is not valid JSON: {exc}") from exc


def _load_instance(args):
    if args.instance:
        return experiments.instance_from_dict(_read_json(args.instance))
    kind, extra = _INSTANCE_BUILTINS[args.builtin]
    factory = experiments.InstanceSpec.full if args.full else experiments.InstanceSpec.desk
    return experiments.build_instance(factory(kind, seed=args.seed, **extra))


def _load_params(args):
    if args.params:
        params = params_from_dict(_read_json(args.params))
    else:
        kw = {"gamma_fraction": args.gamma_fraction}
        if args.inertia is not None:
            kw["inertia"] = args.inertia[0] if len(args.inertia) == 1 else args.inertia
        params = preset(args.preset, **kw)
    changes = {}
    if args.max_iters is not None:
        changes["max_iters"] = args.max_iters
    if args.tol is not None:
        changes["tol_delta_x"] = args.tol
    return params.replace(**changes) if changes else params


def _print_admissibility(rep, out):
    print(f"L          {rep.lipschitz:.10g}", file=out)
    print(f"mu, nu     {rep.mu:g}, {rep.nu:g}", file=out)
    print(f"beta_inf   {rep.beta_inf:.10g}", file=out)
    for i, a in enumerate(rep.alpha_sup):
        print(f"alpha_sup[{i}] {a:.10g}", file=out)
    print(f"delta      {rep.delta:.10g}", file=out)
    print(f"admissible {'yes' if rep.admissible else 'no'}", file=out)


def cmd_validate(args, out):
    inst = _load_instance(args)
    params = _load_params(args)
    rep = compute_admissibility(params, inst.problem.lipschitz)
    _print_admissibility(rep, out)
    return EXIT_OK if rep.admissible else EXIT_FAIL


def _verdict(rep):
    line = f"fitted {rep.regime}"
    if rep.linear_factor is not None:
        line += f" (q = {rep.linear_factor:.6g})"
    if rep.power_exponent is not None:
        line += f" (slope = {rep.power_exponent:.4f})"
    if rep.predicted_regime is not None:
        line += f"; predicted {rep.predicted_regime}"
        if rep.predicted_exponent is not None:
            line += f" (slope = {rep.predicted_exponent:.4f})"
    return line


def cmd_solve(args, out):
    inst = _load_instance(args)
    params = _load_params(args)
    rep = compute_admissibility(params, inst.problem.lipschitz)
    if not rep.admissible and not args.force:
        _print_admissibility(rep, out)
        print("parameters are not admissible; rerun with --force to solve anyway", file=out)
        return EXIT_FAIL
    run = experiments.ComparisonRun(
        instance=inst,
        param_sets=[params],
        forced=frozenset({params.name}) if args.force else frozenset(),
        burn_iters=params.max_iters,
        phi_star=inst.phi_star,
        label="solve",
    )
    run = experiments.run_comparison(run, threads=1)
    tr = run.traces[params.name]
    print(f"termination {tr.reason} after {tr.n_iter} iterations", file=out)
    print(f"phi        {tr.phi[-1]:.16g}", file=out)
    print(f"delta      {tr.admissibility.delta:.6g}"
          f"{'' if tr.admissibility.admissible else ' (forced)'}", file=out)
    if tr.descent_violations is not None:
        print(f"descent violations {len(tr.descent_violations)}", file=out)
    if params.name in run.reports:
        print(_verdict(run.reports[params.name]), file=out)
    if tr.message:
        print(tr.message, file=out)
    if args.out:
        experiments.export_results(run, args.out)
        print(f"wrote {args.out}", file=out)
    return {"tolerance": EXIT_OK, "max_iters": EXIT_MAX_ITERS}.get(tr.reason, EXIT_NUMERICAL)


def run_passes(suite, rep):
    """Whether one fitted report meets the acceptance band of ``suite``."""
    if rep is None or rep.regime != rep.predicted_regime:
        return False
    if rep.regime == "power_law":
        lo, hi = EXPONENT_BANDS.get(
            suite, sorted((0.85 * rep.predicted_exponent, 1.15 * rep.predicted_exponent))
        )
        return lo <= rep.power_exponent <= hi
    if rep.regime == "linear":
        return rep.r_squared >= MIN_LINEAR_R2.get(suite, diagnostics.MIN_R_SQUARED)
    return True


def cmd_reproduce(args, out):
    run = experiments.builtin_run(
        args.builtin, seed=args.seed, full=args.full, max_iters=args.max_iters, tol=args.tol
    )
    run = experiments.run_comparison(run)
    scale = "full" if args.full else "desk"
    print(f"{args.builtin} ({scale} scale, seed {args.seed}, L = {run.instance.problem.lipschitz:.6g})",
          file=out)
    header = f"{'params':<10} {'delta':>10} {'iters':>6} {'phi*':>14}  {'fitted':<28} {'predicted':<20} ok"
    print(header, file=out)
    all_ok = True
    for name in run.names:
        tr = run.traces[name]
        rep = run.reports.get(name)
        ok = run_passes(args.builtin, rep)
        all_ok &= ok
        if rep is None:
            fitted = f"error: {run.errors.get(name, '')}"
            predicted = ""
        else:
            fitted = rep.regime
            if rep.linear_factor is not None:
                fitted += f" q={rep.linear_factor:.4f}"
            if rep.power_exponent is not None:
                fitted += f" slope={rep.power_exponent:.4f}"
            fitted += f" R2={rep.r_squared:.4f}"
            predicted = rep.predicted_regime or "-"
            if rep.predicted_exponent is not None:
                predicted += f" {rep.predicted_exponent:.4f}"
        delta = f"{tr.admissibility.delta:.4g}" + ("*" if name in run.forced else "")
        print(f"{name:<10} {delta:>10} {tr.n_iter:>6} {run.phi_stars[name]:>14.8g}  "
              f"{fitted:<28} {predicted:<20} {'yes' if ok else 'NO'}", file=out)
    if run.forced:
        print("* forced: margin not positive, descent check skipped", file=out)
    if args.out:
        experiments.export_results(run, args.out)
        print(f"wrote {args.out}", file=out)
    return EXIT_OK if all_ok else EXIT_FAIL


def read_trace_csv(path):
    """Columns ``k``, ``phi`` and optionally ``phi_gap`` of a trace CSV."""
    try:
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from exc
    if not rows or "k" not in rows[0] or "phi" not in rows[0]:
        raise UsageError(f"{path}: expected a CSV with k and phi columns")
    try:
        k = np.array([float(r["k"]) for r in rows])
        phi = np.array([float(r["phi"]) for r in rows])
        gap = np.array([float(r["phi_gap"]) for r in rows]) if "phi_gap" in rows[0] else None
    except (TypeError, ValueError) as exc:
        raise UsageError(f"{path}: non-numeric entry ({exc})") from exc
    return k, phi, gap


def _phi_star_from_columns(phi, gap):
    # The limit estimate is an attained value, so its own row has gap 0.
    zero = np.flatnonzero(gap == 0)
    if len(zero):
        return float(phi[zero[-1]])
    return float(phi[0] - gap[0])


def cmd_fit(args, out):
    k, phi, gap = read_trace_csv(args.trace)
    if args.phi_star is not None:
        phi_star = args.phi_star
        gap = phi - phi_star
    elif gap is not None:
        phi_star = _phi_star_from_columns(phi, gap)
    else:
        phi_star = 0.0
        gap = phi
    rep = diagnostics.gap_rate_report(k, gap, phi_star, theta=args.theta,
                                      tail_fraction=args.tail_fraction)
    print(json.dumps(rep.to_dict(), sort_keys=True), file=out)
    return EXIT_OK


def _add_source_args(p, need_params=True):
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--instance", metavar="PATH", help="instance JSON document")
    src.add_argument("--builtin", choices=sorted(_INSTANCE_BUILTINS), help="builtin instance")
    if need_params:
        par = p.add_mutually_exclusive_group(required=True)
        par.add_argument("--params", metavar="PATH", help="parameter JSON document")
        par.add_argument("--preset", choices=PRESETS, help="named parameter preset")
        p.add_argument("--inertia", type=float, nargs="+", metavar="A",
                       help="inertia value(s) for --preset")
        p.add_argument("--gamma-fraction", type=float, default=0.5, metavar="F",
                       help="stepsize as a fraction of 1/L for --preset (default 0.5)")
    p.add_argument("--seed", type=int, default=42, help="instance seed (default 42)")
    p.add_argument("--full", action="store_true", help="full-size 500x1000 least-squares instance")
    p.add_argument("--max-iters", type=int, help="override the iteration cap")
    p.add_argument("--tol", type=float, help="override the step-length tolerance")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="mifb", description="Multi-step inertial forward-backward splitting."
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="print the admissibility margin; exit 0 iff positive")
    _add_source_args(p)

    p = sub.add_parser("solve", help="solve one instance and export its trace")
    _add_source_args(p)
    p.add_argument("--out", metavar="DIR", help="directory for trace CSV and summary JSON")
    p.add_argument("--force", action="store_true", help="solve even if not admissible")

    p = sub.add_parser("reproduce", help="run a builtin comparison suite")
    p.add_argument("--builtin", required=True, choices=experiments.SUITES)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--full", action="store_true", help="full-size 500x1000 least-squares instances")
    p.add_argument("--out", metavar="DIR")
    p.add_argument("--max-iters", type=int)
    p.add_argument("--tol", type=float)

    p = sub.add_parser("fit", help="fit the convergence regime of a trace CSV")
    p.add_argument("trace", metavar="CSV", help="CSV with k, phi and optionally phi_gap")
    p.add_argument("--theta", type=float, help="KL exponent for the prediction")
    p.add_argument("--phi-star", type=float,
                   help="limit value (default: from phi_gap, else 0)")
    p.add_argument("--tail-fraction", type=float, default=0.5)
    return parser


_COMMANDS = {
    "validate": cmd_validate,
    "solve": cmd_solve,
    "reproduce": cmd_reproduce,
    "fit": cmd_fit,
}


def main(argv=None, out=None):
    out = sys.stdout if out is None else out
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return _COMMANDS[args.command](args, out)
    except NumericalFailureError as exc:
        print(f"mifb {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (UsageError, MifbError, OSError) as exc:
        print(f"mifb {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
