"""Command-line front end.

Subcommands mirror the library: solve boundaries, transform the
standardized curve into concrete decision boundaries, evaluate the
deep-time closed form, compute random-horizon thresholds, run the
value-iteration oracle, simulate policies, compare against the classical
two-studies rule, and render boundary CSVs as SVG.

All artifacts are written atomically, all floats at 17 significant digits,
and nothing depends on wall-clock time, so identical inputs give
byte-identical outputs.  Exit codes: 2 validation, 3 solver, 4 I/O.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile

import numpy as np

from . import normal_conjugate as nc
from . import oracle, volterra
from .errors import (
    AnscombeError,
    BracketError,
    ConvergenceError,
    RangeError,
    ResourceError,
    SolverError,
    ValidationError,
)
from .explicit import lomax_threshold, maximin_exp_one_sided, maximin_exp_two_sided
from .horizon import horizon_from_json
from .priors import NormalConjugate, Prior, prior_from_json

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_SOLVER = 3
EXIT_IO = 4


def _fmt(x: float) -> str:
    return format(x, ".17g")


def _atomic_write(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".anscombe-")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_json(path: str, obj) -> None:
    _atomic_write(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _load_json(path: str) -> dict:
    with open(path) as fh:
        return json.load(fh)


def _load_prior(path: str) -> Prior:
    return prior_from_json(_load_json(path))


def _parse_q(text: str) -> float:
    if text.strip().lower() in ("inf", "infinity"):
        return math.inf
    q = float(text)
    if q < 0.0:
        raise ValidationError(f"q must be >= 0 or inf, got {text}")
    return q


def _solver_config(args) -> volterra.SolverConfig:
    return volterra.SolverConfig(
        k=args.grid,
        grid_shape=args.grid_shape,
        inner_tol=args.inner_tol,
        fp_max_iter=args.fp_max_iter,
        fp_tol=args.fp_tol,
        r_min=args.r_min,
    )


def _cmd_boundary(args) -> int:
    prior = _load_prior(args.prior)
    cfg = _solver_config(args)
    q = _parse_q(args.q)
    if isinstance(prior, NormalConjugate):
        sb = nc.solve_cq(q, cfg, args.smin) if (q > 0.0 or args.coupled) else nc.solve_c(cfg, args.smin)
        _atomic_write(args.out, nc.standard_boundary_to_csv(sb))
        return EXIT_OK
    if q == 0.0 and not args.coupled:
        if args.method == "fixed-point":
            boundary = volterra.solve_fixed_point(prior, cfg).boundary
        else:
            boundary = volterra.solve_symmetric(prior, cfg)
    else:
        boundary = volterra.solve_asymmetric(prior, volterra.AsymmetricSpec(q), cfg)
    _atomic_write(args.out, volterra.boundary_to_csv(boundary))
    return EXIT_OK


def _cmd_transform(args) -> int:
    with open(args.c) as fh:
        sb = nc.standard_boundary_from_csv(fh.read())
    grid = np.concatenate(
        [[1.0], 1.0 - (np.arange(1, args.grid) / (args.grid - 1)) ** 2 * (1.0 - args.r_min)]
    )
    if args.target == "mean":
        upper = np.array([nc.posterior_mean_boundary(sb, args.r0, r) for r in grid])
        boundary = volterra.Boundary(grid=grid, upper=upper)
        text = volterra.boundary_to_csv(boundary)
    elif args.target == "sum":
        pairs = [nc.sum_boundaries(sb, args.m0, args.r0, r) for r in grid]
        rows = ["r,b_upper,b_lower"]
        for r, (bu, bl) in zip(grid[::-1], pairs[::-1]):
            lo = "-inf" if bl is None else _fmt(bl)
            rows.append(f"{_fmt(r)},{_fmt(bu)},{lo}")
        text = "\n".join(rows) + "\n"
    else:
        rows = ["r,b_p"]
        for r in grid[::-1]:
            if r <= 0.0:
                continue
            rows.append(f"{_fmt(r)},{_fmt(nc.pvalue_boundary(sb, args.m0, args.r0, r))}")
        text = "\n".join(rows) + "\n"
    _atomic_write(args.out, text)
    _write_json(
        args.out + ".meta.json",
        {"m0": args.m0, "r0": args.r0, "q": args.q, "s_min": sb.s_min, "target": args.target},
    )
    return EXIT_OK


def _cmd_asymptotic(args) -> int:
    q = _parse_q(args.q)
    svals = -np.exp(np.linspace(math.log(-args.s_from), math.log(-args.s_to), args.count))
    rows = ["s,c_upper"]
    for s in svals:
        rows.append(f"{_fmt(s)},{_fmt(nc.asymptotic_cq(s, q))}")
    _atomic_write(args.out, "\n".join(rows) + "\n")
    return EXIT_OK


def _cmd_explicit(args) -> int:
    if args.kind == "two-sided-exp":
        res = maximin_exp_two_sided(args.delta0)
    elif args.kind == "one-sided-exp":
        res = maximin_exp_one_sided(args.delta0)
    else:
        res = lomax_threshold(args.r0)
    obj = {
        "threshold": res.threshold,
        "residual": res.residual,
        "expected_stop_time": res.expected_stop_time,
    }
    if args.out:
        _write_json(args.out, obj)
    else:
        print(json.dumps(obj, sort_keys=True))
    return EXIT_OK


def _cmd_oracle(args) -> int:
    prior = _load_prior(args.prior)
    q = _parse_q(args.q)
    horizon = horizon_from_json(_load_json(args.horizon)) if args.horizon else None
    reward = oracle.TrialReward(prior, q=q, horizon=horizon)
    vg = oracle.value_iteration(
        reward, (args.r_terminal, args.r_stop), args.dr, y_max=args.ymax
    )
    boundary = oracle.extract_boundary(vg)
    _atomic_write(args.out, volterra.boundary_to_csv(boundary))
    return EXIT_OK


def _cmd_simulate(args) -> int:
    prior = _load_prior(args.prior)
    with open(args.boundary) as fh:
        boundary = volterra.boundary_from_csv(fh.read())
    q = _parse_q(args.q)
    horizon = horizon_from_json(_load_json(args.horizon)) if args.horizon else None
    run = oracle.mc_transformed_value if args.transformed else oracle.mc_policy_value
    est = run(
        prior, boundary, q, horizon,
        n_paths=args.paths, step=args.step, seed=args.seed,
    )
    obj = est.to_json()
    if args.out:
        _write_json(args.out, obj)
    else:
        print(json.dumps(obj, sort_keys=True))
    return EXIT_OK


def _cmd_compare_classical(args) -> int:
    cmp_res = nc.classical_rule_compare(args.alpha, args.r, _parse_q(args.q), args.r0, args.m0)
    obj = {
        "classical_threshold": cmp_res.classical,
        "optimal_threshold": cmp_res.optimal,
        "verdict": cmp_res.verdict,
    }
    if args.out:
        _write_json(args.out, obj)
    print(json.dumps(obj, sort_keys=True))
    return EXIT_OK


# ---------------------------------------------------------------------------
# SVG plotting (hand-rolled for byte determinism)
# ---------------------------------------------------------------------------

_SVG_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _read_curves(paths):
    curves = []
    for path in paths:
        with open(path) as fh:
            lines = [ln.strip() for ln in fh if ln.strip()]
        if not lines or "," not in lines[0]:
            raise ValidationError(f"{path}: not a boundary CSV")
        header = lines[0].split(",")
        if len(header) < 2:
            raise ValidationError(f"{path}: need at least two CSV columns")
        xs, ys = [], []
        for ln in lines[1:]:
            cells = ln.split(",")
            if len(cells) != len(header):
                raise ValidationError(f"{path}: ragged CSV row {ln!r}")
            try:
                x = float(cells[0])
                y = float(cells[1])
            except ValueError as exc:
                raise ValidationError(f"{path}: non-numeric cell ({exc})") from exc
            if math.isfinite(x) and math.isfinite(y):
                xs.append(x)
                ys.append(y)
        if len(xs) < 2:
            raise ValidationError(f"{path}: fewer than two plottable points")
        curves.append((os.path.basename(path), xs, ys))
    return curves


def render_svg(curves, width=640, height=440, x_label="", y_label="") -> str:
    """Deterministic SVG: one polyline per curve, legend from curve names."""
    if not curves:
        raise ValidationError("no curves to plot")
    pad = 50.0
    xs_all = [x for _, xs, _ in curves for x in xs]
    ys_all = [y for _, _, ys in curves for y in ys]
    x0, x1 = min(xs_all), max(xs_all)
    y0, y1 = min(ys_all), max(ys_all)
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y1 = y0 + 1.0

    def sx(x):
        return pad + (x - x0) / (x1 - x0) * (width - 2 * pad)

    def sy(y):
        return height - pad - (y - y0) / (y1 - y0) * (height - 2 * pad)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" y2="{height - pad}" '
        'stroke="black" stroke-width="1"/>',
        f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" '
        'stroke="black" stroke-width="1"/>',
    ]
    for val, xpix in ((x0, pad), (x1, width - pad)):
        out.append(
            f'<text x="{xpix}" y="{height - pad + 18}" font-size="11" '
            f'text-anchor="middle">{val:.6g}</text>'
        )
    for val, ypix in ((y0, height - pad), (y1, pad)):
        out.append(
            f'<text x="{pad - 6}" y="{ypix + 4}" font-size="11" '
            f'text-anchor="end">{val:.6g}</text>'
        )
    if x_label:
        out.append(
            f'<text x="{width / 2:.1f}" y="{height - 12}" font-size="12" '
            f'text-anchor="middle">{x_label}</text>'
        )
    if y_label:
        out.append(
            f'<text x="14" y="{height / 2:.1f}" font-size="12" text-anchor="middle" '
            f'transform="rotate(-90 14 {height / 2:.1f})">{y_label}</text>'
        )
    for idx, (name, xs, ys) in enumerate(curves):
        color = _SVG_COLORS[idx % len(_SVG_COLORS)]
        pts = " ".join(f"{sx(x):.3f},{sy(y):.3f}" for x, y in zip(xs, ys))
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
        ly = pad + 16 * idx
        out.append(
            f'<line x1="{width - pad - 130}" y1="{ly}" x2="{width - pad - 105}" y2="{ly}" '
            f'stroke="{color}" stroke-width="1.5"/>'
        )
        out.append(
            f'<text x="{width - pad - 100}" y="{ly + 4}" font-size="11">{name}</text>'
        )
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _cmd_plot(args) -> int:
    curves = _read_curves(args.csv)
    svg = render_svg(curves, x_label=args.xlabel, y_label=args.ylabel)
    _atomic_write(args.out, svg)
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def _add_solver_flags(p):
    p.add_argument("--grid", type=int, default=2000, help="grid size k")
    p.add_argument("--grid-shape", choices=volterra.GRID_SHAPES, default="sqrt")
    p.add_argument("--inner-tol", type=float, default=1e-10)
    p.add_argument("--fp-max-iter", type=int, default=600)
    p.add_argument("--fp-tol", type=float, default=1e-5)
    p.add_argument("--r-min", type=float, default=1e-4)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="anscombe",
        description="Stopping boundaries for sequential two-treatment trials.",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("boundary", help="solve a stopping boundary")
    p.add_argument("--prior", required=True, help="prior JSON file")
    p.add_argument("--q", default="0")
    p.add_argument("--method", choices=("trapezoid", "fixed-point"), default="trapezoid")
    p.add_argument("--coupled", action="store_true",
                   help="use the coupled asymmetric recursion even at q = 0")
    p.add_argument("--smin", type=float, default=nc.DEFAULT_S_MIN,
                   help="depth of the standardized solve (normal priors)")
    _add_solver_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_boundary)

    p = sub.add_parser("transform", help="map a standardized curve to a decision boundary")
    p.add_argument("--c", required=True, help="standardized boundary CSV")
    p.add_argument("--m0", type=float, default=0.0)
    p.add_argument("--r0", type=float, default=0.0)
    p.add_argument("--q", default="0", help="recorded in the sidecar")
    p.add_argument("--target", choices=("mean", "sum", "pvalue"), required=True)
    p.add_argument("--grid", type=int, default=2000)
    p.add_argument("--r-min", type=float, default=1e-4)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_transform)

    p = sub.add_parser("asymptotic", help="tabulate the deep-time closed form")
    p.add_argument("--q", default="0")
    p.add_argument("--s-from", type=float, default=-10.0)
    p.add_argument("--s-to", type=float, default=-1e4)
    p.add_argument("--count", type=int, default=200)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_asymptotic)

    p = sub.add_parser("explicit", help="random-horizon constant thresholds")
    p.add_argument("--kind", choices=("two-sided-exp", "one-sided-exp", "lomax"), required=True)
    p.add_argument("--delta0", type=float, default=1.0)
    p.add_argument("--r0", type=float, default=1.0)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_explicit)

    p = sub.add_parser("oracle", help="value-iteration boundary on the random-walk lattice")
    p.add_argument("--prior", required=True)
    p.add_argument("--q", default="0")
    p.add_argument("--horizon", help="horizon JSON file")
    p.add_argument("--dr", type=float, default=1e-4)
    p.add_argument("--r-terminal", type=float, default=1.0)
    p.add_argument("--r-stop", type=float, default=0.02)
    p.add_argument("--ymax", type=float, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_oracle)

    p = sub.add_parser("simulate", help="Monte Carlo value of a boundary CSV")
    p.add_argument("--prior", required=True)
    p.add_argument("--boundary", required=True)
    p.add_argument("--q", default="0")
    p.add_argument("--horizon")
    p.add_argument("--transformed", action="store_true",
                   help="driftless run paying the discounted h-function")
    p.add_argument("--paths", type=int, default=100_000)
    p.add_argument("--step", type=float, default=1e-4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("compare-classical", help="optimal p-value rule vs alpha^2")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--r", type=float, required=True)
    p.add_argument("--q", default="0")
    p.add_argument("--r0", type=float, default=0.0)
    p.add_argument("--m0", type=float, default=0.0)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_compare_classical)

    p = sub.add_parser("plot", help="render boundary CSVs as SVG")
    p.add_argument("csv", nargs="*", help="boundary CSV files")
    p.add_argument("--xlabel", default="")
    p.add_argument("--ylabel", default="")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_plot)

    return ap


def _error_json(kind: str, exc: BaseException) -> str:
    return json.dumps({"error": {"type": kind, "message": str(exc)}}, sort_keys=True)


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_VALIDATION if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except ValidationError as exc:
        print(_error_json("validation", exc), file=sys.stderr)
        return EXIT_VALIDATION
    except (SolverError, ConvergenceError, BracketError, RangeError, ResourceError) as exc:
        print(_error_json("solver", exc), file=sys.stderr)
        return EXIT_SOLVER
    except (OSError, json.JSONDecodeError) as exc:
        print(_error_json("io", exc), file=sys.stderr)
        return EXIT_IO
    except AnscombeError as exc:
        print(_error_json("solver", exc), file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
