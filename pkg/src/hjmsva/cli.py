"""Command-line front end: ``calibrate``, ``validate`` and ``report``.

Exit codes: 0 success, 1 validation failure, 2 input error. Nothing is
written when the exit code is 2.
"""

from __future__ import annotations

import argparse
import csv
import io
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .calibrator import bootstrap
from .curve import grid_index
from .factors import decompose
from .market_io import (
    BP,
    InputError,
    dump_surface,
    load_config,
    load_curve,
    load_quotes,
    load_surface,
)
from .mcengine import CoverageError, MartingaleCheck, discounted_bond_values, monte_carlo, swaption_values
from .svapprox import normal_vol_from_price

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2
REPORT_FILE = "calibration_report.csv"
SURFACE_FILE = "surface.csv"
FIGURE_HEADER = ("expiry", "tenor", "market_vol_bp", "model_vol_bp", "diff_bp", "mc_se_bp")


def _load_config(args):
    cfg = load_config(args.config)
    over = {}
    if args.seed is not None:
        over["seed"] = args.seed
    if args.paths is not None:
        over["n_paths"] = args.paths
    if over:
        cfg = replace(cfg, **over)
        if cfg.n_paths < 2 or cfg.seed < 0:
            raise InputError("--paths must be >= 2 and --seed >= 0")
        if cfg.antithetic and cfg.n_paths % 2:
            raise InputError("--paths must be even with antithetic sampling")
    return cfg


def cmd_calibrate(args) -> int:
    cfg = _load_config(args)
    curve = load_curve(args.curve, cfg.dt)
    quotes = load_quotes(args.quotes, cfg.dt)
    if not len(quotes):
        raise InputError("no quotes", str(args.quotes))
    need = quotes.grid_size * cfg.dt
    if need > curve.last_maturity + 1e-12:
        raise InputError(f"curve ends at {curve.last_maturity}y but quotes need {need}y", str(args.curve))
    report = bootstrap(curve, quotes)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / REPORT_FILE).write_text(report.to_csv(), encoding="utf-8")
    (out / SURFACE_FILE).write_text(dump_surface(report.surface), encoding="utf-8")
    counts = report.status_counts()
    print(f"quotes: {len(report.records)}  " + "  ".join(f"{k}: {v}" for k, v in counts.items()))
    print(f"max residual: {report.max_residual:.3e}")
    print(f"clamp count: {report.clamp_count}")
    print(f"wrote {out / REPORT_FILE} and {out / SURFACE_FILE}")
    return EXIT_OK


def _validation_checks(n_steps: int):
    """(observation step, maturity step) pairs: at maturity and at half-way."""
    pairs = []
    for j in range(1, n_steps + 1):
        pairs.append((j, j))
        if j >= 2:
            pairs.append((j // 2, j))
    return pairs


def cmd_validate(args) -> int:
    cfg = _load_config(args)
    curve = load_curve(args.curve, cfg.dt)
    fvs = load_surface(args.surface, cfg.dt)
    fsurf = decompose(fvs, cfg.factors)
    n_steps = grid_index(cfg.max_maturity, cfg.dt)
    horizon = n_steps * cfg.dt
    if horizon > curve.last_maturity + 1e-12:
        raise InputError(f"curve ends before {horizon}y", str(args.curve))
    sim = cfg.sim_config(horizon, zero_drift=args.debug_zero_drift)
    checks = _validation_checks(n_steps)
    observe = sorted({i for i, _ in checks})

    def functional(paths):
        return np.stack([discounted_bond_values(paths, i, j) for i, j in checks], axis=1)

    try:
        est = monte_carlo(curve, fsurf, sim, functional, observe)
    except CoverageError as exc:
        raise InputError(str(exc), str(args.surface)) from None
    ref = curve.grid_discounts(n_steps)
    failures = 0
    print(f"{'t':>6} {'T':>6} {'ratio':>12} {'se':>10}  status")
    for k, (i, j) in enumerate(checks):
        chk = MartingaleCheck(i * cfg.dt, j * cfg.dt,
                              type(est)(est.mean[k], est.std_error[k], est.n_paths), float(ref[j]))
        ok = chk.passed(cfg.n_se)
        failures += not ok
        print(f"{chk.time:6.2f} {chk.maturity:6.2f} {chk.ratio:12.8f} {chk.ratio_se:10.2e}  {'ok' if ok else 'FAIL'}")
    print(f"{len(checks) - failures}/{len(checks)} checks within {cfg.n_se:g} SE ({sim.n_paths} paths)")
    return EXIT_FAIL if failures else EXIT_OK


def cmd_report(args) -> int:
    cfg = _load_config(args)
    curve = load_curve(args.curve, cfg.dt)
    quotes = load_quotes(args.quotes, cfg.dt)
    if not len(quotes):
        raise InputError("no quotes", str(args.quotes))
    fvs = load_surface(args.surface, cfg.dt)
    fsurf = decompose(fvs, cfg.factors)
    scheds = [q.schedule(cfg.dt) for q in quotes]
    horizon = max(s.expiry for s in scheds)
    max_mat = max(s.end_index for s in scheds) * cfg.dt
    if max_mat > curve.last_maturity + 1e-12:
        raise InputError(f"curve ends before {max_mat}y", str(args.curve))
    sim = cfg.sim_config(horizon, max_mat)

    def functional(paths):
        return np.stack([swaption_values(paths, s) for s in scheds], axis=1)

    try:
        est = monte_carlo(curve, fsurf, sim, functional, sorted({s.expiry_index for s in scheds}))
    except CoverageError as exc:
        raise InputError(str(exc), str(args.surface)) from None

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(FIGURE_HEADER)
    for q, s, p, se in zip(quotes, scheds, np.atleast_1d(est.mean), np.atleast_1d(est.std_error)):
        model = normal_vol_from_price(curve, s, max(float(p), 0.0))
        # implied vol is linear in the ATM price
        vol_se = model * se / p if p > 0 else 0.0
        nums = (q.expiry, q.tenor, q.vol / BP, model / BP, (model - q.vol) / BP, vol_se / BP)
        w.writerow([repr(float(x)) for x in nums])
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(buf.getvalue(), encoding="utf-8")
    print(f"wrote {len(quotes)} rows to {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hjmsva", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, type=Path)
        p.add_argument("--curve", required=True, type=Path)
        p.add_argument("--seed", type=int, default=None, help="override the configured seed")
        p.add_argument("--paths", type=int, default=None, help="override the configured path count")

    p = sub.add_parser("calibrate", help="bootstrap the forward-vol surface from ATM quotes")
    common(p)
    p.add_argument("--quotes", required=True, type=Path)
    p.add_argument("--out", required=True, type=Path, help="output directory")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("validate", help="Monte Carlo bond martingale checks")
    common(p)
    p.add_argument("--surface", required=True, type=Path)
    p.add_argument("--debug-zero-drift", action="store_true", help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("report", help="model vs market ATM vols by Monte Carlo")
    common(p)
    p.add_argument("--surface", required=True, type=Path)
    p.add_argument("--quotes", required=True, type=Path)
    p.add_argument("--out", required=True, type=Path, help="output CSV")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        return args.func(args)
    except (InputError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
