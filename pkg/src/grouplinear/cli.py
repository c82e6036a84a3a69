"""Command-line entry point: ``grouplinear {estimate,simulate,curve,baseball}``.

Exit codes: 0 success, 2 usage error, 3 data error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .binning import bins_dynamic, parse_binning
from .dataio import SUBSETS, DataError, read_batting_csv, run_table
from .estimators import Dataset, group_linear
from .methods import METHOD_NAMES, canonical_method, get_estimator
from .simulation import SCENARIOS, RiskTable, risk_curve

EXIT_USAGE = 2
EXIT_DATA = 3

DEFAULT_N_GRID = "20:500:20"


class UsageError(Exception):
    pass


def parse_range(text: str) -> list[int]:
    """``start:stop:step`` (inclusive of stop), a comma list, or a single integer."""
    try:
        if ":" in text:
            parts = [int(p) for p in text.split(":")]
            if len(parts) == 2:
                parts.append(1)
            start, stop, step = parts
            if step <= 0 or start > stop:
                raise ValueError
            values = list(range(start, stop + 1, step))
        else:
            values = [int(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad n grid {text!r}; use start:stop:step") from None
    if not values or min(values) < 1:
        raise argparse.ArgumentTypeError(f"bad n grid {text!r}")
    return values


def _method_list(text: str) -> list[str]:
    names = [m.strip() for m in text.split(",") if m.strip()]
    if not names:
        raise argparse.ArgumentTypeError("no methods given")
    try:
        return [canonical_method(m) for m in names]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _method_name(text: str) -> str:
    return canonical_method(_method_list(text)[0])


def _binning(text: str) -> str:
    try:
        parse_binning(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None
    return text


def _subsets(text: str) -> list[str]:
    names = [s.strip() for s in text.split(",") if s.strip()]
    bad = [s for s in names if s not in SUBSETS]
    if bad or not names:
        raise argparse.ArgumentTypeError(f"subsets must be among {', '.join(SUBSETS)}")
    return names


def _open_in(path: str):
    return sys.stdin if path == "-" else open(path, newline="")


def _write_out(path: str, text: str) -> None:
    if path == "-":
        sys.stdout.write(text)
        sys.stdout.flush()
    else:
        with open(path, "w", newline="") as fh:
            fh.write(text)


def _metadata(args: argparse.Namespace) -> dict:
    skip = {"func", "output", "input", "emit_partition"}
    meta = {"command": args.command, "version": __version__}
    for key, value in sorted(vars(args).items()):
        if key in skip or key == "command":
            continue
        if isinstance(value, list):
            value = ",".join(str(v) for v in value)
        meta[key] = value
    return meta


def _fmt(value: float, precision: int) -> str:
    return format(float(value), f".{precision}g")


# ---------------------------------------------------------------------------
# estimate
# ---------------------------------------------------------------------------


def read_xv_csv(fh) -> Dataset:
    reader = csv.reader(fh)
    header = None
    for row in reader:
        if row and not row[0].lstrip().startswith("#"):
            header = [c.strip().lower() for c in row]
            break
    if header is None:
        raise DataError("input is empty")
    if "x" not in header or "v" not in header:
        raise DataError("line 1: header must contain columns x and v")
    ix, iv = header.index("x"), header.index("v")
    xs, vs = [], []
    for row in reader:
        line = reader.line_num
        if not row or row[0].lstrip().startswith("#"):
            continue
        try:
            x = float(row[ix])
            v = float(row[iv])
        except (IndexError, ValueError):
            raise DataError(f"line {line}: expected numeric x and v, got {row!r}") from None
        if not np.isfinite(x):
            raise DataError(f"line {line}: x must be finite")
        if not (np.isfinite(v) and v > 0):
            raise DataError(f"line {line}: v must be positive, got {row[iv]!r}")
        xs.append(x)
        vs.append(v)
    if not xs:
        raise DataError("input has no data rows")
    return Dataset(xs, vs)


def cmd_estimate(args) -> int:
    with _open_in(args.input) as fh:
        data = read_xv_csv(fh)
    partition = None
    if args.method in ("gl", "gl-dynamic"):
        build = bins_dynamic if args.method == "gl-dynamic" else parse_binning(args.binning)
        partition = build(data)
        result = group_linear(data, partition)
    else:
        result = get_estimator(args.method)(data)
    if args.emit_partition:
        if partition is None:
            raise UsageError("--emit-partition needs a group-linear method")
        _write_out(args.emit_partition, partition.to_json(indent=2) + "\n")

    p = args.precision
    blocks = result.blocks if result.blocks is not None else np.full(data.n, -1)
    shrink = result.shrinkage if result.shrinkage is not None else np.zeros(data.n)
    meta = _metadata(args)
    if result.warning:
        meta["warning"] = result.warning
    if args.format == "json":
        rows = [{"index": i, "x": float(_fmt(data.x[i], p)), "v": float(_fmt(data.v[i], p)),
                 "estimate": float(_fmt(result.estimates[i], p)),
                 "block": None if blocks[i] < 0 else int(blocks[i]),
                 "b_hat": float(_fmt(shrink[i], p))} for i in range(data.n)]
        text = json.dumps({"metadata": meta, "rows": rows}, indent=2) + "\n"
    else:
        buf = io.StringIO()
        for key, value in meta.items():
            buf.write(f"# {key}={value}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["index", "x", "v", "estimate", "block", "b_hat"])
        for i in range(data.n):
            w.writerow([i, _fmt(data.x[i], p), _fmt(data.v[i], p), _fmt(result.estimates[i], p),
                        "" if blocks[i] < 0 else int(blocks[i]), _fmt(shrink[i], p)])
        text = buf.getvalue()
    _write_out(args.output, text)
    return 0


# ---------------------------------------------------------------------------
# simulate / curve
# ---------------------------------------------------------------------------


def _estimators(args):
    return {m: get_estimator(m, binning=args.binning) for m in args.methods}


def _emit_table(table: RiskTable, args) -> None:
    table.metadata = {**_metadata(args), **table.metadata}
    text = table.to_json(args.precision) + "\n" if args.format == "json" else table.to_csv(args.precision)
    _write_out(args.output, text)


def cmd_simulate(args) -> int:
    table = risk_curve(args.scenario, _estimators(args), args.n, args.reps, seed=args.seed,
                       oracles=args.oracles, oracle_mc_size=args.oracle_mc)
    _emit_table(table, args)
    return 0


cmd_curve = cmd_simulate


# ---------------------------------------------------------------------------
# baseball
# ---------------------------------------------------------------------------


def cmd_baseball(args) -> int:
    try:
        with _open_in(args.input) as fh:
            records = read_batting_csv(fh)
    except FileNotFoundError:
        raise DataError(f"no such file: {args.input}") from None
    estimators = {m: get_estimator(m, binning=args.binning) for m in args.methods}
    report = run_table(records, estimators, subsets=args.subset, shuffles=args.shuffles, seed=args.seed)
    report.metadata = {**_metadata(args), **report.metadata}
    text = report.to_json(args.precision) + "\n" if args.format == "json" else report.to_csv(args.precision)
    _write_out(args.output, text)
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="grouplinear",
                                     description="Group-linear empirical Bayes shrinkage and its competitors.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, with_seed=True):
        p.add_argument("-o", "--output", default="-", help="output path, '-' for stdout")
        p.add_argument("--format", choices=("csv", "json"), default="csv")
        p.add_argument("--precision", type=int, default=6, help="significant digits")
        p.add_argument("--binning", type=_binning, default="log", help="log, dynamic or width:L (for gl)")
        if with_seed:
            p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("estimate", help="estimate means for an x,v CSV")
    p.add_argument("-i", "--input", default="-", help="CSV with header x,v ('-' for stdin)")
    p.add_argument("--method", default="gl", type=_method_name, help=", ".join(METHOD_NAMES))
    p.add_argument("--emit-partition", metavar="PATH", help="write the bin partition as JSON")
    common(p, with_seed=False)
    p.set_defaults(func=cmd_estimate)

    for name, helptext, n_default, oracle_default in (
        ("simulate", "Monte Carlo risk at one or more n", "500", False),
        ("curve", "risk curves over an n grid", DEFAULT_N_GRID, True),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--scenario", required=True, choices=sorted(SCENARIOS))
        p.add_argument("--method", "--methods", dest="methods", type=_method_list,
                       default=["gl", "sure-m", "sure-sg"], help="comma-separated method names")
        p.add_argument("--n", type=parse_range, default=parse_range(n_default), help="start:stop:step or list")
        p.add_argument("--reps", type=int, default=2000, help="Monte Carlo replications per n")
        p.add_argument("--oracles", action=argparse.BooleanOptionalAction, default=oracle_default,
                       help="append oracle reference rows")
        p.add_argument("--oracle-mc", type=int, default=10**6, help="draws for the oracle computations")
        common(p)
        p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("baseball", help="relative TSE table for batting records")
    p.add_argument("-i", "--input", required=True, help="CSV with header id,h1,n1,h2,n2,pitcher")
    p.add_argument("--methods", type=_method_list,
                   default=["naive", "grand-mean", "js", "sure-m", "sure-sg", "gl", "gl-dynamic"])
    p.add_argument("--subset", type=_subsets, default=list(SUBSETS), help="comma list of all,pitchers,non-pitchers")
    p.add_argument("--shuffles", type=int, default=1000, help="hypergeometric shuffle rounds (0 to skip)")
    common(p)
    p.set_defaults(func=cmd_baseball)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "reps", 1) < 1 or getattr(args, "shuffles", 0) < 0 or args.precision < 1:
        parser.error("--reps must be >= 1, --shuffles >= 0, --precision >= 1")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"grouplinear: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, OSError) as exc:
        print(f"grouplinear: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"grouplinear: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
