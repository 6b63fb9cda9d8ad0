"""Command-line entry point: ``chebymg {run,sweep,estimate-c,bounds,tune}``.

Exit status is 0 on success, 1 when a solve fails to converge and 2 for
configuration errors (bad keys or values, unreadable config, unwritable
output directory).
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys

from .. import analysis
from ..smoothers import FAMILIES, FIRST
from . import emit
from .config import (
    CASE_FIELDS,
    CaseConfig,
    ConfigError,
    case_overrides,
    check_sections,
    load_config,
    parse_scalar,
    parse_value,
    sweep_axes,
)
from .runner import DEFAULT_CANDIDATES, TuningError, build_problem, run_case, sweep, tune_lambda_min_empirical

log = logging.getLogger("chebymg")

EXIT_OK, EXIT_SOLVER, EXIT_CONFIG = 0, 1, 2


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value config file")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a case field, e.g. --set Lx=64 (repeatable)")
    common.add_argument("--seed", type=int,
                        help="base seed: rhs and eigen seeds become SEED, tuning seed SEED+1")
    common.add_argument("--out-dir", help="write result files here")
    common.add_argument("--format", default="csv",
                        help="comma-separated output formats: csv, svg (default csv)")
    common.add_argument("--no-timing", action="store_true",
                        help="leave time_ms empty so repeated runs give identical files")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="chebymg", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("run", parents=[common], help="solve a single case")
    sw = sub.add_parser("sweep", parents=[common], help="run the cross product of sweep.* axes")
    sw.add_argument("--jobs", type=int, default=1, help="worker processes")
    sw.add_argument("--best", action="store_true", help="also print the best row per (Lx, factor)")
    ec = sub.add_parser("estimate-c", parents=[common], help="Lanczos estimate of C")
    ec.add_argument("--iterations", type=int, default=20, help="Lanczos steps (default 20)")
    b = sub.add_parser("bounds", parents=[common], help="tabulate 1/gamma, V(C, k), C* and ratios")
    b.add_argument("--families", default=",".join(FAMILIES))
    b.add_argument("--k", default="1..8", help="orders, list or a..b range")
    b.add_argument("--C", default="4,127,3665", help="C values for V(C, k) and the ratio")
    b.add_argument("--lambda-min", type=float, default=0.1,
                   help="lambda_min of the first family relative to lambda_max "
                        "(first_opt_lambda uses the bound-optimal value)")
    t = sub.add_parser("tune", parents=[common], help="empirically tune the lambda_min multiplier")
    t.add_argument("--candidates", help="comma-separated multipliers (default: 16 log-spaced "
                                        "values in [0.0125, 0.4])")
    return p


def _as_list(v):
    return v if isinstance(v, list) else [v]


def _load(args, **defaults):
    """Base :class:`CaseConfig`, sweep axes and raw config from ``args``."""
    raw = load_config(args.config) if args.config else {}
    check_sections(raw)
    kwargs = dict(defaults)
    kwargs.update(case_overrides(raw))
    for item in args.set:
        key, sep, value = item.partition("=")
        key = key.strip().removeprefix("case.")
        if not sep or key not in CASE_FIELDS:
            raise ConfigError(f"bad --set {item!r}")
        kwargs.update(case_overrides({"case." + key: parse_scalar(value)}))
    if args.seed is not None:
        kwargs.update(rhs_seed=args.seed, eigen_seed=args.seed, tune_seed=args.seed + 1)
    try:
        base = CaseConfig(**kwargs)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    return base, sweep_axes(raw), raw


def _formats(args):
    fmts = tuple(f.strip() for f in args.format.split(",") if f.strip())
    bad = [f for f in fmts if f not in ("csv", "svg")]
    if bad or not fmts:
        raise ConfigError(f"unknown format(s) {bad or args.format!r}")
    return fmts


def _emit(args, results, name):
    if not args.out_dir:
        return
    try:
        paths = emit.emit(results, args.out_dir, _formats(args), name, timing=not args.no_timing)
    except OSError as exc:
        raise ConfigError(str(exc)) from exc
    for p in paths:
        print(f"wrote {p}")


def _print_table(rows, header, out=sys.stdout):
    w = csv.writer(out, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)


def _result_line(r) -> str:
    rep = r.report
    if rep is None:
        return f"{r.config.case_id}: error: {r.error}"
    extra = ""
    if r.lambda_min_mult is not None:
        extra += f" lambda_min_mult={r.lambda_min_mult:.6g}"
    if r.C_est is not None:
        extra += f" C_est={r.C_est:.6g}"
    rho = "" if rep.rho is None else f"{rep.rho:.4g}"
    return (f"{r.config.case_id}: {rep.status} iterations={rep.iterations} "
            f"fine_matvecs={rep.fine_matvecs} rho={rho} lambda_tilde={r.lambda_tilde:.6g}{extra}")


def cmd_run(args) -> int:
    base, axes, _ = _load(args)
    if axes:
        raise ConfigError("sweep.* keys need the sweep subcommand")
    r = run_case(base)
    print(_result_line(r))
    _emit(args, [r], "run")
    return EXIT_OK if r.ok else EXIT_SOLVER


def cmd_sweep(args) -> int:
    base, axes, _ = _load(args)
    if not axes:
        raise ConfigError("no sweep.* axes given")
    if args.jobs < 1:
        raise ConfigError("--jobs must be >= 1")
    res = sweep(base, axes, jobs=args.jobs)
    for r in res.results:
        print(_result_line(r))
    if args.best:
        print("best per (Lx, factor):")
        for (Lx, factor), r in res.best().items():
            print(f"  Lx={Lx:g} factor={factor}: {_result_line(r)}")
    _emit(args, res.results, "sweep")
    return EXIT_OK if all(r.ok for r in res.results) else EXIT_SOLVER


def cmd_estimate_c(args) -> int:
    base, _, _ = _load(args)
    if args.iterations < 1:
        raise ConfigError("--iterations must be >= 1")
    problem = build_problem(base)
    est = analysis.estimate_C(problem.H, m=args.iterations, seed=base.eigen_seed)
    print(f"Lx={base.Lx:g} n={base.n} factor={base.factor} m={est.m} "
          f"lambda_max(SA)={est.lambda_max:.10g} C_est={est.C:.10g}")
    if args.out_dir:
        os.makedirs(args.out_dir, exist_ok=True)
        path = os.path.join(args.out_dir, "estimate_c.csv")
        with open(path, "w", encoding="utf-8", newline="") as fh:
            _print_table([[f"{base.Lx!r}", base.n, base.factor, est.m, repr(est.C)]],
                         ["L_x", "n", "factor", "m", "C_est"], fh)
        print(f"wrote {path}")
    return EXIT_OK


def bounds_table(families, ks, Cs, lambda_min=0.1):
    """Rows ``(family, k, lambda_min, 1/gamma, C*, V(C, k) ..., ratio(C) ...)``.

    ``lambda_min`` applies to ``first``; ``first_opt_lambda`` uses the
    bound-optimal value.  A ``C*`` below one is reported as found.
    """
    rows = []
    for fam in families:
        lm = lambda_min if fam == FIRST else None
        for k in ks:
            g = analysis.gamma_inverse(fam, k, lm)
            try:
                cstar = analysis.critical_C(fam, k, lm, lo=1e-9)
            except ValueError:
                cstar = None
            row = [fam, k, analysis.resolve_lambda_min(fam, k, lm), g, cstar]
            row += [analysis.v_bound(C, fam, k, lm) for C in Cs]
            row += [analysis.bound_ratio(C, fam, k, lm) for C in Cs]
            rows.append(row)
    header = (["family", "k", "lambda_min", "gamma_inv", "C_star"]
              + [f"V_C{C:g}" for C in Cs] + [f"ratio_C{C:g}" for C in Cs])
    return header, rows


def cmd_bounds(args) -> int:
    families = [f.strip() for f in args.families.split(",") if f.strip()]
    bad = [f for f in families if f not in FAMILIES]
    if bad:
        raise ConfigError(f"unknown family {bad}")
    ks = [int(k) for k in _as_list(parse_value(args.k))]
    Cs = [float(c) for c in _as_list(parse_value(args.C))]
    if any(k < 1 for k in ks) or any(C < 1 for C in Cs):
        raise ConfigError("need k >= 1 and C >= 1")
    if not 0 < args.lambda_min < 1:
        raise ConfigError("--lambda-min must lie in (0, 1)")
    header, rows = bounds_table(families, ks, Cs, args.lambda_min)
    fmt = [[("" if v is None else repr(v) if isinstance(v, float) else v) for v in row]
           for row in rows]
    _print_table(fmt, header)
    if args.out_dir:
        os.makedirs(args.out_dir, exist_ok=True)
        path = os.path.join(args.out_dir, "bounds.csv")
        with open(path, "w", encoding="utf-8", newline="") as fh:
            _print_table(fmt, header, fh)
        print(f"wrote {path}")
    return EXIT_OK


def cmd_tune(args) -> int:
    base, _, _ = _load(args, family="first_opt_lambda", lambda_min_mult=None)
    cands = (DEFAULT_CANDIDATES if not args.candidates
             else [float(c) for c in _as_list(parse_value(args.candidates))])
    if any(c <= 0 for c in cands):
        raise ConfigError("candidates must be positive")
    try:
        best = tune_lambda_min_empirical(base, cands)
    except TuningError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    print(f"{base.case_id}: lambda_min_mult={best!r}")
    return EXIT_OK


COMMANDS = {
    "run": cmd_run,
    "sweep": cmd_sweep,
    "estimate-c": cmd_estimate_c,
    "bounds": cmd_bounds,
    "tune": cmd_tune,
}


def main(argv=None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
