"""Command-line front end.

Every subcommand writes plot-ready rows as CSV or JSON. Errors go to stderr
as a single line and the exit status is 2; success exits 0.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from datetime import date
from typing import Any, Sequence

import numpy as np

from . import __version__
from .binom_core import DomainError
from .bias import bias_curves
from .category_agg import compare_profiles
from .ingest import parse_date, parse_manifest, parse_profile, parse_scores, parse_stats
from .planner import DEFAULT_CONFIDENCE, DEFAULT_N_MAX, ToleranceSpec, plan_curve
from .roc_eval import (
    _worker_count,
    analytic_tpr,
    auc,
    roc_from_arrays,
    samples_to_arrays,
    subsample_bias_experiment,
    synth_arrays,
    tpr_at_fpr,
)
from .timedelay_sim import (
    DEFAULT_LABEL_MATURITY_DAYS,
    DEFAULT_LAG_DAYS,
    DelayProtocolConfig,
    run_delay_protocol,
)

FIG2_N = (30, 100, 300, 1000, 3000)


def _fig1a_grid() -> list[float]:
    return [float(x) for x in np.geomspace(1e-5, 1e-3, 25)]


def _fig1b_grid() -> list[float]:
    return [float(x) for x in np.linspace(0.5, 0.95, 10)]


def _fig2_grid() -> list[float]:
    low = np.geomspace(1e-3, 0.5, 40)
    return sorted({float(x) for x in low} | {float(1.0 - x) for x in low})


PLAN_PRESETS = {
    "fig1a": (_fig1a_grid, ToleranceSpec.relative(0.5)),
    "fig1b": (_fig1b_grid, ToleranceSpec.relative(0.01)),
}


class CliError(Exception):
    pass


def parse_grid(text: str) -> list[float]:
    """``a:b:logN`` or ``a:b:linN``, or a comma-separated list of rates."""
    parts = text.split(":")
    try:
        if len(parts) == 1:
            return [float(x) for x in text.split(",") if x.strip()]
        if len(parts) != 3:
            raise ValueError
        a, b, spec = float(parts[0]), float(parts[1]), parts[2]
        if spec.startswith("log"):
            count = int(spec[3:])
            if a <= 0 or b <= 0:
                raise CliError(f"log grid needs positive endpoints, got {text!r}")
            values = np.geomspace(a, b, count)
        elif spec.startswith("lin"):
            count = int(spec[3:])
            values = np.linspace(a, b, count)
        else:
            raise ValueError
    except ValueError:
        raise CliError(f"bad grid {text!r}; expected a:b:logN, a:b:linN or a comma list") from None
    if count < 1:
        raise CliError(f"grid needs at least one point, got {text!r}")
    return [float(x) for x in values]


def _float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _date_arg(text: str) -> date:
    try:
        return parse_date(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _cell(v: Any) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, tuple)):
        return ";".join(_cell(x) for x in v)
    return str(v)


def _json_value(v: Any) -> Any:
    if isinstance(v, float) and math.isinf(v):
        return "inf" if v > 0 else "-inf"
    if isinstance(v, (list, tuple)):
        return [_json_value(x) for x in v]
    return v


def render(columns: Sequence[str], rows: Sequence[Sequence[Any]], fmt: str) -> str:
    if fmt == "json":
        records = [{c: _json_value(v) for c, v in zip(columns, row)} for row in rows]
        return json.dumps(records, indent=1) + "\n"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_cell(v) for v in row])
    return buf.getvalue()


def _write(text: str, path: str | None, stdout) -> None:
    if path is None or path == "-":
        stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def cmd_plan(args, stdout) -> int:
    tol = None
    if args.alpha is not None:
        tol = ToleranceSpec.relative(args.alpha)
    elif args.sigma is not None:
        tol = ToleranceSpec.absolute(args.sigma)
    if args.preset:
        make_grid, preset_tol = PLAN_PRESETS[args.preset]
        grid = make_grid()
        tol = tol or preset_tol
    elif args.p is not None:
        grid = args.p
    elif args.p_grid is not None:
        grid = parse_grid(args.p_grid)
    else:
        raise CliError("plan needs --p, --p-grid or --preset")
    if tol is None:
        raise CliError("plan needs --alpha or --sigma")
    rows = plan_curve(
        grid,
        tol,
        args.c,
        args.n_max,
        args.stable_window,
        workers=_worker_count(None),
    )
    table = [(p, r.n_required, r.coverage_at_n, r.stable) for p, r in rows]
    _write(render(("p", "n_required", "coverage", "stable"), table, args.format), args.output, stdout)
    return 0


def cmd_bias(args, stdout) -> int:
    if args.preset == "fig2":
        grid = _fig2_grid()
        n_list = list(FIG2_N)
    else:
        if args.p is not None:
            grid = args.p
        elif args.p_grid is not None:
            grid = parse_grid(args.p_grid)
        else:
            raise CliError("bias needs --p, --p-grid or --preset")
        n_list = args.n
    if args.preset and args.n:
        n_list = args.n
    if not n_list:
        raise CliError("bias needs --n")
    rows = bias_curves(grid, n_list, args.fraction)
    table = [(r.p, r.n, r.skew, r.p_under, r.p_over, r.p_exact, r.severe) for r in rows]
    cols = ("p", "n", "skew", "p_under", "p_over", "p_exact", "severe")
    _write(render(cols, table, args.format), args.output, stdout)
    return 0


def cmd_roc(args, stdout) -> int:
    separation = None
    if args.scores:
        scores, labels = samples_to_arrays(parse_scores(args.scores, negate=args.negate))
    else:
        n_pos = args.n_pos or args.n
        n_neg = args.n_neg or args.n
        if not n_pos or not n_neg:
            raise CliError("--synthetic needs --n or both --n-pos and --n-neg")
        separation = args.separation
        scores, labels = synth_arrays(n_pos, n_neg, separation, args.seed)
    curve = roc_from_arrays(scores, labels)
    targets = args.targets or []

    table = [(pt.threshold, pt.fpr, pt.tpr) for pt in curve.points]
    _write(render(("threshold", "fpr", "tpr"), table, args.format), args.output, stdout)

    report: dict[str, Any] = {
        "n_pos": curve.n_pos,
        "n_neg": curve.n_neg,
        "auc": auc(curve),
        "fpr_targets": targets,
        "tpr_at_targets": [tpr_at_fpr(curve, f) for f in targets],
    }
    if separation is not None:
        report["separation"] = separation
        report["seed"] = args.seed
        report["analytic_tpr"] = [analytic_tpr(f, separation) for f in targets]
    if args.sub_neg or args.sub_pos:
        if not (args.sub_neg and args.sub_pos):
            raise CliError("--sub-neg and --sub-pos must be given together")
        if not targets:
            raise CliError("the subsampling experiment needs --targets")
        exp = subsample_bias_experiment(
            (scores, labels),
            args.sub_neg,
            args.sub_pos,
            targets,
            args.trials,
            args.seed,
            separation=separation,
        )
        report["experiment"] = exp.to_dict()
    if args.report is not None or args.output not in (None, "-"):
        _write(json.dumps(report, indent=1) + "\n", args.report, stdout)
    return 0


def cmd_aggregate(args, stdout) -> int:
    stats = parse_stats(args.stats)
    profiles = [parse_profile(path, normalize=args.normalize) for path in args.profile]
    rows = compare_profiles(stats, profiles)
    table = []
    for row in rows:
        r = row.result
        if r is None:
            table.append((row.profile_name, None, None, None, None, str(row.error)))
        else:
            table.append((r.profile_name, r.tpr, r.fpr, r.effective_n_pos, r.effective_n_neg, None))
    cols = ("profile", "tpr", "fpr", "effective_n_pos", "effective_n_neg", "error")
    _write(render(cols, table, args.format), args.output, stdout)
    failed = [row for row in rows if row.error is not None]
    if failed:
        first = failed[0]
        raise CliError(f"profile {first.profile_name!r}: {first.error}")
    return 0


def cmd_timedelay(args, stdout) -> int:
    manifest = parse_manifest(args.manifest, negate=args.negate)
    cfg = DelayProtocolConfig(
        freeze_date=args.freeze,
        evaluation_window_days=args.window,
        lag_days=args.lag,
        label_maturity_days=args.maturity,
    )
    report = run_delay_protocol(manifest, cfg, args.threshold).to_dict()
    if args.format == "json":
        text = json.dumps(_json_value_dict(report), indent=1) + "\n"
    else:
        text = render(list(report), [list(report.values())], "csv")
    _write(text, args.output, stdout)
    return 0


def _json_value_dict(d: dict) -> dict:
    return {k: _json_value(v) for k, v in d.items()}


def _add_common(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--format", choices=("csv", "json"), default="csv")
    sp.add_argument("--output", "-o", metavar="FILE", help="write data here instead of stdout")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="evalplan",
        description="Sample-size planning and evaluation tools for detector error rates.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("plan", help="required sample size per rate")
    src = sp.add_mutually_exclusive_group()
    src.add_argument("--p", type=_float_list, help="rate or comma-separated rates")
    src.add_argument("--p-grid", help="a:b:logN or a:b:linN")
    src.add_argument("--preset", choices=sorted(PLAN_PRESETS))
    tol = sp.add_mutually_exclusive_group()
    tol.add_argument("--alpha", type=float, help="relative half-width of the window")
    tol.add_argument("--sigma", type=float, help="absolute half-width of the window")
    sp.add_argument("--c", type=float, default=DEFAULT_CONFIDENCE, help="target coverage")
    sp.add_argument("--n-max", type=int, default=DEFAULT_N_MAX)
    sp.add_argument("--stable-window", type=int, default=0)
    _add_common(sp)
    sp.set_defaults(func=cmd_plan)

    sp = sub.add_parser("bias", help="skew and severe underestimation of k/n")
    src = sp.add_mutually_exclusive_group()
    src.add_argument("--p", type=_float_list)
    src.add_argument("--p-grid")
    src.add_argument("--preset", choices=("fig2",))
    sp.add_argument("--n", type=_int_list, help="sample size or comma-separated sizes")
    sp.add_argument("--fraction", type=float, default=0.5)
    _add_common(sp)
    sp.set_defaults(func=cmd_bias)

    sp = sub.add_parser("roc", help="ROC curve and the subsampling optimism experiment")
    src = sp.add_mutually_exclusive_group(required=True)
    src.add_argument("--scores", metavar="FILE")
    src.add_argument("--synthetic", action="store_true")
    sp.add_argument("--negate", action="store_true", help="flip score sign on input")
    sp.add_argument("--separation", type=float, default=2.0)
    sp.add_argument("--n", type=int, help="synthetic samples per class")
    sp.add_argument("--n-pos", type=int)
    sp.add_argument("--n-neg", type=int)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--targets", type=_float_list, help="comma-separated FPR targets")
    sp.add_argument("--sub-neg", type=int)
    sp.add_argument("--sub-pos", type=int)
    sp.add_argument("--trials", type=int, default=200)
    sp.add_argument("--report", metavar="FILE", help="JSON report destination ('-' for stdout)")
    _add_common(sp)
    sp.set_defaults(func=cmd_roc)

    sp = sub.add_parser("aggregate", help="weighted TPR/FPR per weight profile")
    sp.add_argument("--stats", required=True, metavar="FILE")
    sp.add_argument("--profile", required=True, nargs="+", metavar="FILE")
    sp.add_argument("--normalize", action="store_true", help="rescale weights to sum to one")
    _add_common(sp)
    sp.set_defaults(func=cmd_aggregate)

    sp = sub.add_parser("timedelay", help="time-lagged evaluation over a manifest")
    sp.add_argument("--manifest", required=True, metavar="FILE")
    sp.add_argument("--freeze", required=True, type=_date_arg, metavar="YYYY-MM-DD")
    sp.add_argument("--lag", type=int, default=DEFAULT_LAG_DAYS)
    sp.add_argument("--window", type=int, default=None, help="evaluation window in days")
    sp.add_argument("--maturity", type=int, default=DEFAULT_LABEL_MATURITY_DAYS)
    sp.add_argument("--threshold", type=float, required=True)
    sp.add_argument("--negate", action="store_true")
    _add_common(sp)
    sp.set_defaults(func=cmd_timedelay)
    return parser


def main(argv: Sequence[str] | None = None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args, stdout)
    except (DomainError, CliError, OSError, ValueError) as exc:
        msg = " ".join(str(exc).split())
        print(f"evalplan {args.command}: error: {msg}", file=stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
