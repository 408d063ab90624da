"""Command-line front end: ``sturmian <command> [options]``.

Every command writes plot-ready rows (CSV with a header, floats to 17
significant digits) or a single JSON document.  The JSON form always carries a
``config`` block that echoes the fully resolved options, so a run can be
repeated from its own output.

Exit codes: 0 success, 1 usage error, 2 numeric failure, 3 verification failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .contfrac import circle_arcs, parse_digits, special_values, three_distance_gaps
from .exceptions import PreconditionError, SturmianError
from .fractal import box_dimension, thickness
from .surface import (
    DEFAULT_THRESHOLD,
    SurvivalRegionSpec,
    orbit_classify,
    spectral_line_point,
    spectrum_estimate,
    survival_set,
    trace_map_apply,
    worker_count,
)
from .torus.linear import BETA0

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_VERIFY = 0, 1, 2, 3


class UsageError(Exception):
    """Invalid command-line input; maps to exit code 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    if isinstance(x, str):
        return x
    return format(float(x), ".17g")


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    return x


def _emit(args, header, rows, summary):
    """Write rows as CSV or everything as JSON, to ``--output`` or stdout.

    With CSV output to a file, the summary goes next to it as ``<output>.json``.
    """
    summary = dict(summary)
    summary["config"] = _config(args)
    if args.format == "json":
        doc = dict(summary)
        doc["columns"] = list(header)
        doc["rows"] = [list(r) for r in rows]
        text = json.dumps(_jsonable(doc), indent=2, sort_keys=True) + "\n"
        _write(args.output, text)
        return
    _write(args.output, _csv(header, rows))
    if args.output and args.output != "-":
        _write(args.output + ".json", json.dumps(_jsonable(summary), indent=2, sort_keys=True) + "\n")


def _write(path, text):
    if not path or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _config(args) -> dict:
    skip = {"func", "command_name"}
    out = {("lambda" if k == "lam" else k): v for k, v in vars(args).items() if k not in skip}
    out["command"] = args.command_name
    out["version"] = __version__
    return out


# ---------------------------------------------------------------------------
# validation helpers


def _digits(args):
    try:
        return parse_digits(args.alpha)
    except (ValueError, TypeError, SturmianError) as exc:
        raise UsageError(f"cannot parse --alpha {args.alpha!r}: {exc}") from exc


def _positive(name, value):
    if value is None or not value > 0:
        raise UsageError(f"{name} must be positive, got {value!r}")


def _lambda(value):
    if value is None or not value >= 0:
        raise UsageError(f"--lambda must be >= 0, got {value!r}")
    return float(value)


def _common_checks(args):
    _positive("--resolution", args.resolution)
    _positive("--max-steps", args.max_steps)
    if not args.escape_threshold > 2:
        raise UsageError("--escape-threshold must exceed 2")


def _region(args):
    if args.rho is None:
        return None
    if not 0 < args.rho < 1:
        raise UsageError("--rho must lie in (0, 1)")
    return SurvivalRegionSpec(args.rho)


# ---------------------------------------------------------------------------
# commands


def cmd_spectrum(args):
    _common_checks(args)
    lam = _lambda(args.lam)
    cf = _digits(args)
    s = spectrum_estimate(lam, cf, args.resolution, args.max_steps, args.escape_threshold)
    summary = {
        "lambda": lam,
        "digits": cf.describe(),
        "resolution": args.resolution,
        "intervals": len(s),
        "total_length": float(s.measure()),
        "undecided_cells": s.undecided_cells,
    }
    _emit(args, ["left", "right"], s.intervals, summary)
    return EXIT_OK


def cmd_survival(args):
    _common_checks(args)
    lam = _lambda(args.lam)
    cf = _digits(args)
    region = _region(args)
    if region is None:
        raise UsageError("survival requires --rho")
    s = survival_set(lam, region, cf, args.resolution, args.max_steps, args.escape_threshold)
    summary = {
        "lambda": lam,
        "digits": cf.describe(),
        "resolution": args.resolution,
        "rho": args.rho,
        "intervals": len(s),
        "total_length": float(s.measure()),
        "undecided_cells": s.undecided_cells,
        "empty": s.empty,
    }
    _emit(args, ["left", "right"], s.intervals, summary)
    return EXIT_OK


def _dim_row(lam, cf, args, region):
    t0 = time.perf_counter()
    s = spectrum_estimate(lam, cf, args.resolution, args.max_steps, args.escape_threshold, threads=1)
    if len(s) == 1:
        # a single interval: dimension one, and no gaps to measure thickness
        box, tau, lower = 1.0, math.inf, 1.0
    else:
        box = box_dimension(s).dim
        rep = thickness(s)
        tau, lower = float(rep.tau), rep.dim_lower
    row = [lam, box, tau, lower, float(s.measure())]
    extra = {"undecided_cells": s.undecided_cells, "intervals": len(s)}
    if region is not None:
        surv = survival_set(lam, region, cf, args.resolution, args.max_steps, args.escape_threshold, threads=1)
        if surv.empty:
            row += [None, None]
        elif len(surv) == 1:
            row += [math.inf, 1.0]
        else:
            rep = thickness(surv)
            row += [float(rep.tau), rep.dim_lower]
        extra["survival_intervals"] = len(surv)
    extra["runtime"] = round(time.perf_counter() - t0, 3)
    return row, extra


def cmd_dimension_sweep(args):
    _common_checks(args)
    if not args.lambda_list:
        raise UsageError("dimension-sweep requires --lambda-list")
    lams = [_lambda(x) for x in args.lambda_list]
    if any(b >= a for a, b in zip(lams, lams[1:])):
        raise UsageError("--lambda-list must be strictly decreasing")
    cf = _digits(args)
    region = _region(args)
    workers = max(1, min(worker_count(), len(lams)))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(lambda lam: _dim_row(lam, cf, args, region), lams))
    header = ["lambda", "box_dim", "tau", "dim_lower", "total_length"]
    if region is not None:
        header += ["survival_tau", "survival_dim_lower"]
    rows = [r for r, _ in results]
    if args.timings:
        header.append("runtime")
        rows = [r + [e["runtime"]] for r, e in results]
    summary = {
        "digits": cf.describe(),
        "per_lambda": [dict(e, **{"lambda": lam}) for lam, (_, e) in zip(lams, results)],
    }
    _emit(args, header, rows, summary)
    return EXIT_OK


def cmd_orbit(args):
    _positive("--max-steps", args.max_steps)
    if not args.escape_threshold > 2:
        raise UsageError("--escape-threshold must exceed 2")
    lam = _lambda(args.lam)
    cf = _digits(args)
    region = _region(args)
    p0 = spectral_line_point(lam, float(args.energy))
    res = orbit_classify(p0, cf, args.max_steps, args.escape_threshold, region)
    rows = [[0, 0, *p0]]
    p = np.array(list(p0), dtype=float)
    digits = cf.digits(res.steps)
    with np.errstate(over="ignore", invalid="ignore"):
        for k, a in enumerate(digits, start=1):
            p = trace_map_apply(a, p)
            rows.append([k, a, *p.tolist()])
    summary = {
        "lambda": lam,
        "energy": float(args.energy),
        "status": res.status,
        "steps": res.steps,
        "max_norm": res.max_norm,
        "exit_index": res.exit_index,
    }
    _emit(args, ["step", "digit", "x1", "x2", "x3"], rows, summary)
    return EXIT_OK


def cmd_stable_manifold(args):
    from .torus import graph_transform_manifold

    lam = _lambda(args.lam)
    cf = _digits(args)
    _positive("--depth", args.depth)
    _positive("--tol", args.tol)
    options = {}
    if args.rho is not None:
        options["rho"] = args.rho
    g = graph_transform_manifold(lam, cf, depth=args.depth, tol=args.tol, m=args.m, **options)
    rows = [[t, x, y] for t, (x, y) in zip(g.s, g.points())]
    summary = dict(g.summary())
    summary["fitted_slope"] = g.fitted_slope()
    _emit(args, ["t", "x", "y"], rows, summary)
    return EXIT_OK


def cmd_three_distance(args):
    cf = _digits(args)
    _positive("--n", args.n)
    n = int(args.n)
    arcs = np.sort(circle_arcs(cf, n))
    lengths = three_distance_gaps(cf, n)
    special = [sv.n for sv in special_values(cf, n)]
    rows = [[i, float(x)] for i, x in enumerate(arcs)]
    summary = {
        "digits": cf.describe(),
        "n": n,
        "distinct_lengths": [float(x) for x in lengths],
        "count": len(lengths),
        "special_value": n in special,
    }
    _emit(args, ["index", "arc_length"], rows, summary)
    return EXIT_OK


def cmd_property_c(args):
    from .torus import ConeSpec, build_perturbed_map, property_c_verify

    lam = _lambda(args.lam)
    _positive("--grid", args.grid)
    _positive("--beta", args.beta)
    try:
        alphabet = sorted({int(a) for a in args.alphabet.split(",")})
    except ValueError as exc:
        raise UsageError(f"bad --alphabet {args.alphabet!r}") from exc
    options = {"lambda_guard": args.lambda_guard}
    if args.rho is not None:
        options["rho"] = args.rho
    maps = [build_perturbed_map(lam, a, **options) for a in alphabet]
    rep = property_c_verify(maps, cones=ConeSpec(args.beta), grid=args.grid, delta=args.delta)
    summary = rep.to_dict()
    summary["lambda"] = lam
    summary["alphabet"] = alphabet
    row = [lam, rep.grid_size, rep.cone_violations, rep.worst_expansion, rep.worst_contraction, int(rep.passed)]
    _emit(args, ["lambda", "grid", "cone_violations", "worst_expansion", "worst_contraction", "passed"], [row], summary)
    return EXIT_OK if rep.passed else EXIT_VERIFY


def cmd_verify(args):
    from .verify import run_suite

    only = args.only.split(",") if args.only else None
    report = run_suite(seed=args.seed, only=only, progress=lambda line: print(line, file=sys.stderr))
    report["config"] = _config(args)
    _write(args.output, json.dumps(_jsonable(report), indent=2, sort_keys=True) + "\n")
    return EXIT_OK if report["passed"] else EXIT_VERIFY


# ---------------------------------------------------------------------------
# parser


def _add_common(p, *, spectral=True):
    p.add_argument("--alpha", default="golden", help='digit string: "1,1,2", "(1,2)*", "golden" or "silver"')
    p.add_argument("--output", default=None, help="output file (default stdout)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--seed", type=int, default=0)
    if spectral:
        p.add_argument("--lambda", dest="lam", type=float, default=0.0, help="coupling constant")
        p.add_argument("--resolution", type=float, default=1e-3)
        p.add_argument("--max-steps", type=int, default=1000)
        p.add_argument("--escape-threshold", type=float, default=DEFAULT_THRESHOLD)
        p.add_argument("--rho", type=float, default=None, help="cusp-ball radius of the survival region")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sturmian", description="Spectra of Sturmian Hamiltonians via trace maps.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command_name", required=True, parser_class=_Parser)

    p = sub.add_parser("spectrum", help="interval approximation of the spectrum")
    _add_common(p)
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("survival", help="survival set for a cusp radius --rho")
    _add_common(p)
    p.set_defaults(func=cmd_survival)

    p = sub.add_parser("dimension-sweep", help="dimension estimates over a decreasing list of couplings")
    _add_common(p)
    p.add_argument("--lambda-list", type=float, nargs="+", default=None)
    p.add_argument("--timings", action="store_true", help="append a runtime column (makes output nondeterministic)")
    p.set_defaults(func=cmd_dimension_sweep)

    p = sub.add_parser("orbit", help="trace-map orbit of one energy")
    _add_common(p)
    p.add_argument("--energy", type=float, required=True)
    p.set_defaults(func=cmd_orbit)

    p = sub.add_parser("stable-manifold", help="local stable manifold by graph transform")
    _add_common(p, spectral=False)
    p.add_argument("--lambda", dest="lam", type=float, default=0.0)
    p.add_argument("--rho", type=float, default=None)
    p.add_argument("--depth", type=int, default=50)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--m", type=int, default=1, help="digit shift of the base point")
    p.set_defaults(func=cmd_stable_manifold)

    p = sub.add_parser("three-distance", help="arc lengths of the first n rotation points")
    _add_common(p, spectral=False)
    p.add_argument("--n", type=int, required=True)
    p.set_defaults(func=cmd_three_distance)

    p = sub.add_parser("property-c", help="sample the cone and expansion conditions on a grid")
    _add_common(p, spectral=False)
    p.add_argument("--lambda", dest="lam", type=float, default=0.0)
    p.add_argument("--rho", type=float, default=None)
    p.add_argument("--beta", type=float, default=BETA0)
    p.add_argument("--grid", type=int, default=200)
    p.add_argument("--delta", type=float, default=0.1)
    p.add_argument("--alphabet", default="1,2", help="comma-separated digits")
    p.add_argument("--lambda-guard", type=float, default=0.2, help="largest coupling accepted without complaint")
    p.set_defaults(func=cmd_property_c)

    p = sub.add_parser("verify", help="run the invariant suite")
    p.add_argument("--output", default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--only", default=None, help="comma-separated check names")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, PreconditionError, ValueError) as exc:
        print(f"sturmian: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SturmianError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"sturmian: numeric failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
