"""
Command line entry point.

    rep certify  --config run.toml --out results/
    rep simulate --config run.toml --out results/
    rep verify   --config run.toml --out results/

Exit codes: 0 success (criterion true / all checks pass), 10 criterion false or
a verify check failed, 2 initial data violate p'(rho0) < a c^2, 1 usage,
configuration or I/O error.
"""

import argparse
import json
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np
import pandas as pd
from dotenv import load_dotenv

from .certificate import cauchy_gap, certify, h_functional, monitor, riccati_lower_bound, velocity_source_sign
from .characteristics import density_along_path, support_radius, trace_many
from .config import RunConfig, parse_config
from .errors import ConfigError, HypothesisViolation, InvalidTestingFunction, UsageError
from .plots import emit_plots
from .solver import run, total_charge

logger = logging.getLogger("rep")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_HYPOTHESIS = 2
EXIT_FALSE = 10

TIMESERIES_COLUMNS = ["t", "H", "riccati_bound", "max_dv2_dr", "max_dpprime_dr", "max_dw_dr", "support_radius",
                      "total_charge"]
SNAPSHOT_COLUMNS = ["r", "rho", "v", "D", "S", "phi_r"]
FLOAT_FORMAT = "%.17g"
LOG_FORMAT = "[%(levelname)s] %(message)s"
CONSERVATION_TOL_PER_1000_STEPS = 1e-8
BREAKDOWN_FACTOR = 1.5


def setup_logging(quiet: bool = False) -> None:
    default = "WARNING" if quiet else "INFO"
    raw = os.getenv("REP_LOG_LEVEL")
    try:
        logging.basicConfig(level=(raw or default).upper(), format=LOG_FORMAT, force=True)
    except ValueError:
        logging.basicConfig(level=default, format=LOG_FORMAT, force=True)
        logger.warning(f"Ignoring invalid REP_LOG_LEVEL={raw!r}")


def _write_json(path: Path, data: dict) -> None:
    path.write_text(json.dumps(data, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")


def _certificate(config: RunConfig):
    """Certificate for the configured initial data (HypothesisViolation propagates)."""
    grid = config.radial_grid()
    _, v0 = config.initial_profile()
    return certify(config.testing_function_fn(), config.initial_state(grid), grid,
                   config.physical_params(), quad_n=config.monitor.quad_n, v0=v0)


def cmd_certify(args: argparse.Namespace) -> int:
    config = parse_config(args.config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    inputs = config.model_dump(mode="json")
    try:
        cert = _certificate(config)
    except HypothesisViolation as e:
        logger.error(str(e))
        _write_json(out / "certificate.json", {
            "hypothesis_violation": str(e),
            "cell_index": e.cell_index,
            "pprime": e.pprime,
            "inputs": inputs,
        })
        return EXIT_HYPOTHESIS
    _write_json(out / "certificate.json", {**cert.to_dict(), "inputs": inputs})
    logger.info(f"Wrote {out / 'certificate.json'}")
    return EXIT_OK if cert.criterion else EXIT_FALSE


def _bound_column(cert, times: np.ndarray) -> np.ndarray:
    bound = np.full(times.shape, np.nan)
    if cert is None or not cert.criterion:
        return bound
    finite = (times >= 0) & (times < cert.T_pred)
    bound[finite] = riccati_lower_bound(cert, times[finite])
    return bound


def simulate_artifacts(config: RunConfig, out: Path, tamper_zero_velocity: bool = False) -> dict:
    """
    Run the solver and write timeseries.csv, snapshots/, breakdown.json and plots.

    Args:
        config: Validated configuration
        out: Output directory
        tamper_zero_velocity: Replace every snapshot velocity by zero before
            post-processing (negative control for the monitor)

    Returns:
        Run context (series, report, certificate, derived columns) for verify
    """
    out.mkdir(parents=True, exist_ok=True)
    try:
        cert = _certificate(config)
    except HypothesisViolation as e:
        logger.warning(f"No certificate for this run: {e}")
        cert = None

    series, report = run(config)
    if tamper_zero_velocity:
        logger.warning("Test hook: zeroing every snapshot velocity")
        series = series.with_velocity(np.zeros((len(series), series.grid.n_cells)))

    grid = series.grid
    f = config.testing_function_fn()
    times = series.times
    H = np.array([h_functional(f, s.prim.v, grid) for s in series.snapshots])
    bound = _bound_column(cert, times)
    support = support_radius(series, config.monitor.mass_fraction)
    charge = np.array([total_charge(s.cons, grid) for s in series.snapshots])

    table = pd.DataFrame({
        "t": times,
        "H": H,
        "riccati_bound": bound,
        "max_dv2_dr": [s.regularity.max_dv2_dr for s in series.snapshots],
        "max_dpprime_dr": [s.regularity.max_dpprime_dr for s in series.snapshots],
        "max_dw_dr": [s.regularity.max_dw_dr for s in series.snapshots],
        "support_radius": support,
        "total_charge": charge,
    }, columns=TIMESERIES_COLUMNS)
    table.to_csv(out / "timeseries.csv", index=False, na_rep="", float_format=FLOAT_FORMAT)

    snap_dir = out / "snapshots"
    snap_dir.mkdir(exist_ok=True)
    for k, snap in enumerate(series.snapshots):
        pd.DataFrame({
            "r": grid.centers,
            "rho": snap.prim.rho,
            "v": snap.prim.v,
            "D": snap.cons.D,
            "S": snap.cons.S,
            "phi_r": snap.field.phi_r,
        }, columns=SNAPSHOT_COLUMNS).to_csv(snap_dir / f"snapshot_{k:04d}.csv", index=False,
                                            float_format=FLOAT_FORMAT)

    _write_json(out / "breakdown.json", report.to_dict())
    has_bound = cert is not None and cert.criterion
    emit_plots(series, H, bound if has_bound else None, out)
    logger.info(f"Wrote {len(series)} snapshots to {out}")
    return {
        "config": config,
        "series": series,
        "report": report,
        "cert": cert,
        "f": f,
        "H": H,
        "support": support,
        "charge": charge,
    }


def cmd_simulate(args: argparse.Namespace) -> int:
    config = parse_config(args.config)
    simulate_artifacts(config, Path(args.out))
    return EXIT_OK


def _check(passed: bool, worst_margin, **extra) -> dict:
    margin = None if worst_margin is None or not math.isfinite(worst_margin) else float(worst_margin)
    return {"passed": bool(passed), "worst_margin": margin, **extra}


def path_start_radii(config: RunConfig) -> np.ndarray:
    """n_paths sorted starting radii drawn uniformly from [r_0, R) with the run seed."""
    grid = config.radial_grid()
    low = grid.centers[0]
    if config.monitor.n_paths == 0 or low >= grid.R:
        return np.empty(0)
    rng = np.random.default_rng(config.run.seed)
    return np.sort(rng.uniform(low, grid.R, config.monitor.n_paths))


def verify_checks(ctx: dict) -> dict:
    """Evaluate every verify property on a simulate context."""
    config, series, report, cert, f = ctx["config"], ctx["series"], ctx["report"], ctx["cert"], ctx["f"]
    grid, params = series.grid, series.params
    regular = [s for s in series.snapshots if s.regularity.regular]
    checks = {}

    if cert is not None and cert.criterion:
        result = monitor(series, f, cert, grid, config.monitor.tol_monitor)
        checks["riccati_monitor"] = _check(result.passed, result.worst_margin, checked=len(result.records),
                                           violations=result.to_dict()["violations"])
        if config.run.t_final >= BREAKDOWN_FACTOR * cert.T_pred:
            limit = BREAKDOWN_FACTOR * cert.T_pred
            fired = report.occurred and report.t_breakdown <= limit
            margin = limit - report.t_breakdown if report.occurred else None
            checks["breakdown_time"] = _check(fired, margin, limit=limit)
    else:
        checks["riccati_monitor"] = _check(True, None, skipped="criterion false or no certificate")

    limit = grid.R + 2.0 * grid.dr
    regular_support = [r for s, r in zip(series.snapshots, ctx["support"]) if s.regularity.regular]
    worst = max(regular_support, default=0.0)
    checks["support"] = _check(worst <= limit, limit - worst, limit=limit)

    min_D = min((float(np.min(s.cons.D)) for s in series.snapshots), default=0.0)
    radii = path_start_radii(config)
    paths = trace_many(radii, series) if len(series) else []
    records = [density_along_path(p, series, params) for p in paths]
    path_positive = all(rec.positive for rec in records)
    checks["positivity"] = _check(min_D >= 0 and path_positive, min_D, paths=len(records))

    charge = ctx["charge"]
    steps = max(len(series.dt_history), 1)
    allowed = CONSERVATION_TOL_PER_1000_STEPS * max(1.0, steps / 1000.0)
    if charge.size and charge[0] > 0:
        drift = float(np.max(np.abs(charge - charge[0])) / charge[0])
    else:
        drift = float(np.max(np.abs(charge), initial=0.0))
    checks["conservation"] = _check(drift <= allowed, allowed - drift, relative_drift=drift, steps=steps)

    max_speed = max((float(np.max(np.abs(s.prim.v))) for s in series.snapshots), default=0.0)
    max_speed = max([max_speed] + [p.max_speed for p in paths])
    checks["subluminality"] = _check(max_speed < params.c, params.c - max_speed)

    gaps = [cauchy_gap(f, s.prim.v, grid) for s in regular]
    min_gap = min(gaps, default=0.0)
    scale = max((h * h for h in ctx["H"]), default=0.0)
    checks["cauchy_gap"] = _check(min_gap >= -1e-12 * max(scale, 1e-300), min_gap)

    sources = [velocity_source_sign(s.prim, grid, params, s.field.phi_r) for s in regular]
    min_source = min(sources, default=0.0)
    checks["velocity_source_sign"] = _check(min_source >= 0, min_source)
    return checks


def cmd_verify(args: argparse.Namespace, tamper_zero_velocity: bool = False) -> int:
    config = parse_config(args.config)
    out = Path(args.out)
    ctx = simulate_artifacts(config, out, tamper_zero_velocity=tamper_zero_velocity)
    checks = verify_checks(ctx)
    passed = all(c["passed"] for c in checks.values())
    _write_json(out / "verdict.json", {
        "passed": passed,
        "checks": checks,
        "breakdown": ctx["report"].to_dict(),
    })
    for name, check in checks.items():
        if not check["passed"]:
            logger.warning(f"Check failed: {name} (worst margin {check['worst_margin']})")
    if passed:
        logger.info("All checks passed")
    return EXIT_OK if passed else EXIT_FALSE


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rep", description="Blowup certificates and simulations for "
                                "the radial relativistic Euler-Poisson system")
    sub = p.add_subparsers(dest="cmd", required=True)
    for name, func, help_text in (
        ("certify", cmd_certify, "Evaluate the blowup criterion for the initial data"),
        ("simulate", cmd_simulate, "Run the solver and write CSV/JSON/SVG artifacts"),
        ("verify", cmd_verify, "Simulate, then check the monitored properties"),
    ):
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("--config", required=True, help="Path to a .toml/.yaml config")
        sp.add_argument("--out", required=True, help="Output directory")
        sp.add_argument("--quiet", action="store_true", help="Only log warnings and errors")
        sp.set_defaults(func=func)
    return p


def main(argv: list[str] | None = None) -> int:
    load_dotenv()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_USAGE
    setup_logging(args.quiet)
    try:
        return args.func(args)
    except (ConfigError, UsageError, InvalidTestingFunction) as e:
        logger.error(str(e))
    except OSError as e:
        logger.error(f"I/O error: {e}")
    return EXIT_USAGE


def main_entry() -> None:
    raise SystemExit(main(sys.argv[1:]))


if __name__ == "__main__":
    main_entry()
