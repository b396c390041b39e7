"""Command-line entry point: ``cvrsp {simulate,sweep,fit,oracle,contour}``."""

from __future__ import annotations

import argparse
import math
import os
import sys

import numpy as np

from . import __version__
from . import components as comp
from .config import RunConfig, emit_config, load_config, to_human, to_internal
from .exceptions import CvrspError, DataError
from .fitting import FitResult, SweepGrid, direct_contour, fit_model, max_error_contour, run_sweep, set_params
from .oracle import MUTATIONS, run_oracle
from .protocol import find_optimal_gain, run_rsp, summarize_prepared
from .security import otp_delta, wigner_contour
from .tables import header_block, read_table, write_table

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2

SWEEP_TABLES = (
    ("s_rp.csv", "s_rp_db", "s_db"),
    ("a_rp.csv", "a_rp_db", "a_db"),
    ("gamma_rp.csv", "gamma_rp_deg", "gamma_deg"),
    ("mu.csv", "mu", "mu"),
)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _u64(text):
    try:
        v = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _positive_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v <= 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cvrsp", description="Gaussian model of continuous-variable remote state preparation.")
    parser.add_argument("--version", action="version", version=f"cvrsp {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    helps = {
        "simulate": "prepared-state report at the configured feedforward setting",
        "sweep": "observable maps over the configured (G_f, gamma_f) grid",
        "fit": "least-squares fit to observed sweep tables",
        "oracle": "Monte Carlo check of the analytic covariance",
        "contour": "phase-space contour of the prepared states",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", required=True, metavar="PATH", help="YAML run configuration")
        p.add_argument("--out", metavar="DIR", help="output directory (default: output.dir)")
        p.add_argument("--seed", type=_u64, metavar="U64", help="override the config seed")
        p.add_argument("--samples", type=_positive_int, metavar="N", help="oracle samples or contour resolution")
        p.add_argument("--kind", choices=("direct", "max-error"), default="direct", help="contour kind")
        if name == "fit":
            p.add_argument("--observed", metavar="DIR", help="directory holding s_rp.csv, a_rp.csv, gamma_rp.csv")
        if name == "contour":
            p.add_argument("--fit", metavar="PATH", help="fit.csv written by 'cvrsp fit'")
        if name == "oracle":
            p.add_argument("--mutate", choices=MUTATIONS, help="corrupt one sampled map (self-test)")
    return parser


class _Context:
    def __init__(self, args, cfg: RunConfig):
        self.args = args
        self.cfg = cfg
        self.seed = cfg.seed if args.seed is None else args.seed
        self.out = args.out or cfg["output"]["dir"]

    def meta(self, **extra):
        return header_block(self.args.command, self.cfg.sha256, self.seed, extra)

    def path(self, name):
        return os.path.join(self.out, name)


def _resolved_params(cfg: RunConfig):
    params = cfg.params()
    if cfg["model"]["psa"]["gain_db"] == "optimal":
        params = params.with_feedforward(find_optimal_gain(params))
    return params


def cmd_simulate(ctx: _Context) -> int:
    cfg = ctx.cfg
    params = _resolved_params(cfg)
    prepared, _, joint = run_rsp(params)
    s = summarize_prepared(prepared)
    rows = [
        ("gain_db", comp.db_from_gain(params.psa.gain_linear)),
        ("gamma_f_deg", math.degrees(params.psa.gamma_f)),
        ("s_rp_db", s.s_rp_db),
        ("a_rp_db", s.a_rp_db),
        ("gamma_rp_deg", s.gamma_rp_deg),
        ("mu", s.mu),
        ("degenerate", s.degenerate),
        ("cov_qq", float(s.cov[0, 0])),
        ("cov_qp", float(s.cov[0, 1])),
        ("cov_pp", float(s.cov[1, 1])),
    ]
    if cfg["entropy"]["report"]:
        e = otp_delta(joint, cfg["entropy"]["base"])
        rows += [("h_m", e.h_m), ("h_c", e.h_c), ("h_mc", e.h_mc), ("h_m_given_c", e.h_m_given_c), ("delta", e.delta)]
    write_table(ctx.path("prepared.csv"), ctx.meta(entropy_base=cfg["entropy"]["base"]), ["quantity", "value"], rows)
    if cfg["output"]["wigner_contour"]:
        ell = wigner_contour(prepared)
        write_table(
            ctx.path("wigner_contour.csv"),
            ctx.meta(level="exp(-1)", tilt_rad=ell.tilt),
            ["q", "p"],
            ell.points(),
        )
    return EXIT_OK


def cmd_sweep(ctx: _Context) -> int:
    cfg = ctx.cfg
    gains, angles = cfg.axis("gains_db"), cfg.axis("angles_deg")
    grid = run_sweep(cfg.params(), gains, angles, cfg["sweep"]["entropy"], cfg["entropy"]["base"])
    maps = dict(grid.observables(), mu=grid.mu)
    tables = list(SWEEP_TABLES)
    if grid.entropy is not None:
        maps["delta"] = grid.delta
        tables.append(("delta.csv", "delta", "delta"))
    for fname, column, key in tables:
        values = maps[key]
        rows = [(g, a, float(values[i, j])) for i, g in enumerate(gains) for j, a in enumerate(angles)]
        write_table(ctx.path(fname), ctx.meta(shape=f"{len(gains)}x{len(angles)}"), ["gain_db", "gamma_f_deg", column], rows)
    return EXIT_OK


def read_observed(directory, gains, angles) -> SweepGrid:
    shape = (len(gains), len(angles))
    maps = {}
    for fname, column, key in SWEEP_TABLES[:3]:
        path = os.path.join(directory, fname)
        _, columns, rows = read_table(path)
        if columns != ["gain_db", "gamma_f_deg", column]:
            raise DataError(f"{path}: expected columns gain_db,gamma_f_deg,{column}, got {','.join(columns)}")
        if len(rows) != shape[0] * shape[1]:
            raise DataError(f"{path}: {len(rows)} rows do not match the {shape[0]}x{shape[1]} config grid")
        values = np.empty(shape)
        for k, (g, a, v) in enumerate(rows):
            i, j = divmod(k, shape[1])
            if abs(g - gains[i]) > 1e-9 or abs(a - angles[j]) > 1e-9:
                raise DataError(f"{path}: data row {k + 1} at ({g}, {a}) does not match grid point ({gains[i]}, {angles[j]})")
            values[i, j] = v
        maps[key] = values
    return SweepGrid.from_observables(gains, angles, maps["s_db"], maps["a_db"], maps["gamma_deg"])


def cmd_fit(ctx: _Context) -> int:
    cfg = ctx.cfg
    fit_cfg = cfg["fit"]
    observed = read_observed(ctx.args.observed or ctx.out, cfg.axis("gains_db"), cfg.axis("angles_deg"))
    result = fit_model(
        observed,
        fit_cfg["free"],
        cfg.params(),
        bounds=cfg.fit_bounds(),
        weights=fit_cfg["weights"],
        max_evaluations=fit_cfg["max_evaluations"],
    )
    rows = []
    for name in result.free_names:
        value = to_human(name, result.values[name])
        if result.confidence_95 is None:
            lo = hi = ""
        else:
            lo, hi = (to_human(name, v) for v in result.confidence_95[name])
        rows.append((name, value, lo, hi))
    meta = ctx.meta(
        converged=result.converged,
        intervals_available=result.intervals_available,
        objective=result.objective,
        initial_objective=result.initial_objective,
        evaluations=result.evaluations,
    )
    write_table(ctx.path("fit.csv"), meta, ["name", "value", "ci95_low", "ci95_high"], rows)
    write_table(ctx.path("residuals.csv"), ctx.meta(), ["observable", "rms"], sorted(result.residual_rms.items()))
    fitted = cfg.with_params(result.params)
    with open(ctx.path("fitted_config.yaml"), "w", encoding="utf-8") as fh:
        fh.write(emit_config(fitted))
    return EXIT_OK


def read_fit(path, cfg: RunConfig) -> FitResult:
    meta, columns, rows = read_table(path, numeric=False)
    if columns != ["name", "value", "ci95_low", "ci95_high"]:
        raise DataError(f"{path}: not a fit table")
    names, values, intervals = [], [], {}
    for k, row in enumerate(rows, start=1):
        name = row[0]
        try:
            value = float(row[1])
            ci = None if row[2] == "" else (float(row[2]), float(row[3]))
        except ValueError as exc:
            raise DataError(f"{path}: data row {k} is not numeric") from exc
        names.append(name)
        values.append(to_internal(name, value))
        if ci is not None:
            intervals[name] = tuple(sorted(to_internal(name, v) for v in ci))
    try:
        params = set_params(cfg.params(), names, values)
    except KeyError as exc:
        raise DataError(f"{path}: unknown parameter {exc}") from exc
    available = meta.get("intervals_available", "true") == "true" and len(intervals) == len(names)
    return FitResult(params, tuple(names), {}, intervals if available else None, math.nan, math.nan)


def cmd_contour(ctx: _Context) -> int:
    cfg = ctx.cfg
    gains, angles = cfg.contour_range("gains_db"), cfg.contour_range("angles_deg")
    samples = ctx.args.samples or cfg["contour"]["samples"]
    fit = read_fit(ctx.args.fit, cfg) if ctx.args.fit else None
    if ctx.args.kind == "max-error":
        if fit is None:
            raise DataError("max-error contours need confidence intervals: run 'cvrsp fit' and pass --fit PATH/fit.csv")
        if fit.confidence_95 is None:
            raise DataError(f"{ctx.args.fit} has no confidence intervals: refit with more data points than parameters")
        contour = max_error_contour(fit, gains, angles, ctx.seed, samples)
        fname = "contour_max_error.csv"
    else:
        contour = direct_contour(fit if fit is not None else cfg.params(), gains, angles, samples)
        fname = "contour_direct.csv"
    meta = ctx.meta(
        kind=ctx.args.kind,
        area_deg_db=contour.area,
        degenerate=contour.degenerate,
        samples=samples,
        iterations=contour.iterations,
    )
    write_table(ctx.path(fname), meta, ["gamma_rp_deg", "s_rp_db"], contour.polygon)
    return EXIT_OK


def cmd_oracle(ctx: _Context) -> int:
    cfg = ctx.cfg
    samples = ctx.args.samples or cfg["oracle"]["samples"]
    report = run_oracle(_resolved_params(cfg), samples, ctx.seed, ctx.args.mutate)
    labels = ("q_c", "p_c", "q_m", "p_m")
    rows = [
        (labels[i], labels[j], report.analytic[i, j], report.sampled[i, j], report.z_scores[i, j])
        for i in range(4)
        for j in range(i, 4)
    ]
    meta = ctx.meta(samples=samples, mutation=report.mutation or "none", max_abs_z=report.max_abs_z, passed=report.passed)
    write_table(ctx.path("oracle.csv"), meta, ["row", "col", "analytic", "sampled", "z"], rows)
    if not report.passed:
        print(f"cvrsp: oracle failed: max |z| = {report.max_abs_z:.3g} > 5", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "fit": cmd_fit,
    "oracle": cmd_oracle,
    "contour": cmd_contour,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        return COMMANDS[args.command](_Context(args, cfg))
    except (CvrspError, OSError) as exc:
        print(f"cvrsp: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
