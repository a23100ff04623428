"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 infeasible configuration,
3 validation failure.
"""

from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import replace

import numpy as np

from .asymptotics import AsymptoticContext, asymptotic_risk, cch_mi_gap, cch_verdict, small_lambda_condition
from .gaussian_model import (
    CorrelationSpec,
    InfeasibleSpecError,
    derive_population_model,
    sample_dataset,
    validate_feasibility,
)
from .harness import ConfigError, SweepConfig, load_config, run_sweep
from .mi import ksg_mi, ross_mi
from .output import emit_csv, emit_svg
from .regression import excess_risk_population, fit_student, fit_teacher_population
from .validation import run_validation

EXIT_OK, EXIT_USAGE, EXIT_INFEASIBLE, EXIT_VALIDATION = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _add_spec_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON sweep config; its spec_base and lambda are used")
    p.add_argument("--sigma12", type=float)
    p.add_argument("--sigma13", type=float)
    p.add_argument("--sigma23", type=float)
    p.add_argument("--p", type=int)


def _spec_from_args(args) -> tuple[CorrelationSpec, SweepConfig | None]:
    cfg = load_config(args.config) if args.config else None
    base = cfg.spec_base if cfg else CorrelationSpec(0.5, 0.9, 0.4, 100)
    overrides = {k: getattr(args, k) for k in ("sigma12", "sigma13", "sigma23", "p")
                 if getattr(args, k) is not None}
    try:
        return replace(base, **overrides), cfg
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cchkd", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    sw = sub.add_parser("sweep", help="run a configured sweep and write CSV (and SVG)")
    sw.add_argument("--config", required=True)
    sw.add_argument("--out", required=True, help="CSV output path")
    sw.add_argument("--svg", metavar="PREFIX", help="write PREFIXmse.svg and PREFIXmi.svg")
    sw.add_argument("--seed", type=int, help="override the config master_seed")

    mi = sub.add_parser("mi", help="KSG or Ross MI estimate from a CSV file")
    mi.add_argument("--file", required=True)
    mi.add_argument("--k", type=int, default=3)

    rk = sub.add_parser("risk", help="limiting and Monte-Carlo risk at one parameter point")
    _add_spec_args(rk)
    rk.add_argument("--n", type=int, default=10_000)
    rk.add_argument("--lam", type=float)
    rk.add_argument("--seed", type=int, default=0)
    rk.add_argument("--reps", type=int, default=5)

    va = sub.add_parser("validate", help="Monte-Carlo vs limit agreement and CCH grid check")
    va.add_argument("--quick", action="store_true")

    cs = sub.add_parser("check-spec", help="feasibility diagnostics for a correlation triple")
    _add_spec_args(cs)
    return parser


def _cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = replace(cfg, master_seed=args.seed)
    cfg.check_feasible()
    records = run_sweep(cfg)
    emit_csv(records, args.out)
    print(f"wrote {len(records)} records to {args.out}")
    if args.svg:
        x_label = cfg.sweep_variable.value
        emit_svg(records, f"{args.svg}mse.svg", ["mse_kd", "mse_no_kd"], x_label=x_label,
                 y_label="student test MSE", title=f"Student MSE vs {x_label}")
        emit_svg(records, f"{args.svg}mi.svg", ["i_ts_closed", "i_sy_closed", "i_ts_ksg", "i_sy_ksg"],
                 x_label=x_label, y_label="mutual information (nats)",
                 title=f"Representation MI vs {x_label}")
        print(f"wrote {args.svg}mse.svg and {args.svg}mi.svg")
    return EXIT_OK


def _cmd_mi(args) -> int:
    with open(args.file, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 2:
        raise UsageError(f"{args.file}: need a header row and data")
    header, body = rows[0], rows[1:]
    y_cols = [i for i, h in enumerate(header) if h.startswith("y_")]
    if not y_cols:
        raise UsageError("CSV needs y_0.. columns")
    if "label" in header:
        li = header.index("label")
        labels = np.array([r[li] for r in body])
        y = np.array([[float(r[i]) for i in y_cols] for r in body])
        est = ross_mi(labels, y, args.k)
    else:
        x_cols = [i for i, h in enumerate(header) if h.startswith("x_")]
        if not x_cols:
            raise UsageError("CSV needs x_0.. columns or a label column")
        x = np.array([[float(r[i]) for i in x_cols] for r in body])
        y = np.array([[float(r[i]) for i in y_cols] for r in body])
        est = ksg_mi(x, y, args.k)
    print(f"{est.estimator.value} k={est.k} n={est.n} mi={est.value:.6f} nats")
    return EXIT_OK


def _cmd_risk(args) -> int:
    spec, cfg = _spec_from_args(args)
    lam = args.lam if args.lam is not None else (cfg.lam if cfg else 0.5)
    if args.n == spec.p:
        raise UsageError("n == p is not covered by either regime")
    model = derive_population_model(spec)
    teacher = fit_teacher_population(model)
    kappa = args.n / spec.p
    rows = []
    for label, l in (("kd", lam), ("no_kd", 0.0)):
        theory = asymptotic_risk(AsymptoticContext(model, kappa, teacher, l)).total
        mc = [excess_risk_population(fit_student(sample_dataset(spec, args.n, args.seed + r), teacher, l), model)
              for r in range(args.reps)]
        rows.append((label, l, theory, float(np.mean(mc))))
    print(f"spec {spec}  n={args.n} kappa={kappa:.4g}")
    print(f"{'student':<8}{'lambda':>8}{'limit':>14}{'monte_carlo':>14}")
    for label, l, theory, mc in rows:
        print(f"{label:<8}{l:>8.3g}{theory:>14.6e}{mc:>14.6e}")
    cond = small_lambda_condition(model, teacher)
    print(f"CCH verdict: {cch_verdict(model, teacher)}; small-lambda lhs={cond.lhs:.6g} "
          f"(beneficial={cond.beneficial})")
    try:
        gap = cch_mi_gap(model, teacher)
        print(f"I_ts={gap.i_ts:.6f} I_sy={gap.i_sy:.6f} gap={gap.gap:.6f} nats")
    except ValueError:
        pass
    return EXIT_OK


def _cmd_validate(args) -> int:
    results = run_validation(quick=args.quick)
    width = max(len(r.name) for r in results)
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name:<{width}}  {r.detail}")
    return EXIT_OK if all(r.passed for r in results) else EXIT_VALIDATION


def _cmd_check_spec(args) -> int:
    spec, _ = _spec_from_args(args)
    report = validate_feasibility(spec)
    print(report.describe())
    return EXIT_OK if report.feasible else EXIT_INFEASIBLE


_COMMANDS = {
    "sweep": _cmd_sweep,
    "mi": _cmd_mi,
    "risk": _cmd_risk,
    "validate": _cmd_validate,
    "check-spec": _cmd_check_spec,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_help(sys.stderr)
            return EXIT_USAGE
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InfeasibleSpecError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
