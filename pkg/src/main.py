"""
Blowup Compass - Main Entry Point

Command line for the blow-up laboratory. Each subcommand reads one YAML
experiment description, runs it and writes its artifacts to the output
directory:

    simulate   physical run to blow-up, trajectory.csv and rate.json
    rescaled   similarity-variable run, energy.csv, monitor.json, schedule.json
    verify     structure, stationary, identity, monitor and subsolution suites
    exponents  exact exponent schedule and bootstrap chain
    report     PNG charts rendered from the CSV/JSON artifacts

Exit codes: 0 success, 2 validation failure, 3 no blow-up detected,
4 verification failure, 5 numerical breakdown during a run.
"""

import argparse
import json
import logging
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from itertools import product
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from analysis.reporting import _make_json_safe, render_report, write_json, write_table
from config import (
    EXIT_NO_BLOWUP,
    EXIT_NUMERICAL,
    EXIT_OK,
    EXIT_VALIDATION,
    EXIT_VERIFICATION,
    MAX_SPHERE_COMPONENTS,
)
from core.errors import (
    BlowupOverflow,
    ConfigError,
    FitWindowError,
    InstabilityError,
    LabError,
    ResamplingError,
    UnsupportedError,
    WindowError,
)
from core.grid import CutoffProfile, Field, write_field
from core.nonlinearity import (
    StructureConstants,
    SystemParams,
    check_structure,
    exponent_regime,
    structure_constants,
)
from diagnostics.bootstrap import (
    bootstrap_chain,
    chain_length,
    exponent_schedule,
    verify_schedule_on_run,
)
from diagnostics.energy import (
    check_identity_dissipation,
    check_identity_mass,
    check_local_identities,
    convergence_order,
    energy_table,
    global_energy,
)
from diagnostics.monitors import initial_energy_bound, monitor_bounds
from diagnostics.subsolution import bump_family, component_part_residual, subsolution_residual
from experiment import (
    ExperimentConfig,
    build_grid,
    build_initial_field,
    dump_config,
    load_config,
    system_params,
)
from solvers.physical import SolverControls, fit_rate, run_to_blowup
from solvers.selfsimilar import (
    RescaledTrajectory,
    SelfSimilarFrame,
    evolve_rescaled,
    kappa_constant,
    rescaled_stability_limit,
    rhs_rescaled,
    write_frame,
)

logger = logging.getLogger(__name__)

# Interior residual bar for the constant rescaled state
STATIONARY_TOLERANCE = 1e-10


def _configure_logging(verbose: bool) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        datefmt='%H:%M:%S',
    )


def _banner(title: str) -> None:
    print("\n" + "=" * 70)
    print(title)
    print("=" * 70)


def _print_checks(checks: Dict[str, str]) -> None:
    for name, status in checks.items():
        mark = "✓" if status == "pass" else ("?" if status == "inconclusive" else "✗")
        print(f"  {mark} {name}: {status}")


def _constants_for(params: SystemParams) -> Optional[StructureConstants]:
    if params.components > MAX_SPHERE_COMPONENTS:
        return None
    return structure_constants(params)


def _output_dir(config: ExperimentConfig) -> Path:
    path = Path(config.outputs.directory)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _rescaled_run(
    config: ExperimentConfig,
    params: SystemParams,
    refinements: int = 0,
    ds_cap: Optional[float] = None,
) -> RescaledTrajectory:
    """Evolve the configured rescaled data from s0 = -log T to s_max on a grid refined ``refinements`` times."""
    grid = build_grid(config)
    for _ in range(refinements):
        grid = grid.refined()
    solver = config.solver
    W0 = build_initial_field(config, grid, params)
    s0 = -math.log(solver.T)
    ds = solver.ds if ds_cap is None else min(solver.ds, ds_cap)
    ds /= 2**refinements
    limit = rescaled_stability_limit(grid)
    if ds > limit:
        logger.warning(f"[RescaledSolver] ds={ds:g} exceeds the stability limit; using {limit:.6g}")
        ds = limit
    frame = SelfSimilarFrame((0.0,) * grid.space_dim, solver.T, s0, W0)
    return evolve_rescaled(frame, ds, solver.s_max - s0, params, solver.frame_every, solver.boundary)


def _stable_base_step(config: ExperimentConfig, levels: int) -> float:
    """Largest ds such that ds / 2^k respects the stability limit of every refinement level k."""
    grid = build_grid(config)
    cap = config.solver.ds
    for k in range(levels):
        cap = min(cap, rescaled_stability_limit(grid) * 2**k)
        grid = grid.refined()
    return cap


# ----------------------------------------------------------------------
# simulate
# ----------------------------------------------------------------------
def cmd_simulate(config: ExperimentConfig) -> int:
    """Run to blow-up, extrapolate T and fit the rate."""
    _banner("PHYSICAL BLOW-UP RUN")
    params = system_params(config)
    grid = build_grid(config)
    U0 = build_initial_field(config, grid, params)
    solver = config.solver
    controls = SolverControls(
        dt_init=solver.dt_init,
        threshold=solver.threshold,
        t_max=solver.t_max,
        snapshot_every=config.outputs.snapshot_every,
        boundary=solver.boundary,
        max_steps=solver.max_steps,
    )
    print("\nRun Parameters:")
    print(f"  N={params.space_dim}, M={params.components}, p={params.p:g}, boundary={solver.boundary}")
    print(f"  Grid: n={grid.points_per_axis}, L={grid.half_extent:g}, initial data: {config.initial_data.kind}")

    trajectory, estimate = run_to_blowup(U0, params, controls)
    out = _output_dir(config)
    dump_config(config, out / "config.yaml")
    write_table(out / "trajectory.csv", trajectory.to_frame())
    for k, (_, snapshot) in enumerate(trajectory.snapshots):
        write_field(out / "snapshots" / f"snapshot_{k:05d}.csv", snapshot)

    payload: Dict[str, object] = {
        "outcome": trajectory.outcome,
        "params": params.to_dict(),
        "regime": exponent_regime(params.p, params.space_dim),
        "steps": len(trajectory) - 1,
        "rejections": trajectory.rejections,
        "blowup": None,
        "rate": None,
    }
    if estimate is None:
        write_json(out / "rate.json", payload)
        print(f"\nOutcome: {trajectory.outcome} (t reached {trajectory.times[-1]:.6g})")
        return EXIT_NO_BLOWUP

    payload["blowup"] = estimate.to_dict()
    print(f"\nBlow-up detected: T_est = {estimate.T_est:.10g} ({estimate.samples} samples in the final decade)")
    try:
        rate = fit_rate(trajectory, estimate.T_est, params, constants=_constants_for(params))
        payload["rate"] = rate.to_dict()
        print(f"  Exponent: {rate.exponent:.6f} (expected {rate.expected_exponent:.6f})")
        print(f"  Plateau:  {rate.plateau:.6g} (variation {rate.plateau_variation:.2%})")
    except FitWindowError as exc:
        payload["rate_error"] = str(exc)
        print(f"  Rate fit unavailable: {exc}")
    write_json(out / "rate.json", payload)
    print(f"\nArtifacts saved to: {out}")
    return EXIT_OK


# ----------------------------------------------------------------------
# rescaled
# ----------------------------------------------------------------------
def _schedule_entries(
    traj: RescaledTrajectory, params: SystemParams, q_values: List[float]
) -> List[Dict[str, object]]:
    entries = []
    L = traj.grid.half_extent
    for q in q_values:
        entry: Dict[str, object] = {"q": q}
        try:
            schedule = exponent_schedule(params.p, q)
            m = chain_length(params.p, q) if q > 2 else 0
            R_target = L / 4**m
            entry.update(verify_schedule_on_run(schedule, traj, R_target, params).to_dict())
            entry["R_target"] = R_target
        except LabError as exc:
            entry["error"] = str(exc)
        entries.append(entry)
    return entries


def cmd_rescaled(config: ExperimentConfig) -> int:
    """Evolve in similarity variables and monitor every energy bound."""
    _banner("SELF-SIMILAR RUN")
    params = system_params(config)
    traj = _rescaled_run(config, params)
    out = _output_dir(config)
    dump_config(config, out / "config.yaml")

    monitors = config.monitors
    tolerance = monitors.tolerance * monitors.tolerance_scale
    cutoff = CutoffProfile(radius=monitors.cutoff_radii[0])
    table = energy_table(traj, params, cutoff, monitors.ball_radii[0], config.solver.boundary)
    write_table(out / "energy.csv", table)
    write_frame(out / "final_frame.csv", traj[-1])

    constants = _constants_for(params)
    reports = [
        monitor_bounds(traj, R, q, params, constants, cutoff, tolerance, config.solver.boundary)
        for R, q in product(monitors.ball_radii, monitors.q_values)
    ]
    write_json(
        out / "monitor.json",
        {
            "params": params.to_dict(),
            "s_range": [float(traj.s[0]), float(traj.s[-1])],
            "frames": len(traj),
            "monitors": [report.to_dict() for report in reports],
        },
    )
    write_json(out / "schedule.json", {"regime": exponent_regime(params.p, params.space_dim),
                                       "schedules": _schedule_entries(traj, params, monitors.q_values)})

    print(f"\nFrames: {len(traj)} over s in [{traj.s[0]:.4g}, {traj.s[-1]:.4g}]")
    for report in reports:
        print(f"\nMonitors (R={report.ball_radius:g}, q={report.q:g}):")
        _print_checks({name: "pass" if ok else "fail" for name, ok in report.flags.items()})
    print(f"\nArtifacts saved to: {out}")
    return EXIT_OK if all(report.passed for report in reports) else EXIT_VERIFICATION


# ----------------------------------------------------------------------
# verify
# ----------------------------------------------------------------------
def _suite_structure(config: ExperimentConfig, params: SystemParams) -> Dict[str, object]:
    report = check_structure(params, config.verify.sample_count, config.seed)
    return report.to_dict()


def _suite_stationary(config: ExperimentConfig, params: SystemParams) -> Dict[str, object]:
    grid = build_grid(config)
    try:
        kappa = kappa_constant(params)
    except UnsupportedError as exc:
        return {"status": "inconclusive", "reason": str(exc)}
    W = Field.constant(grid, kappa)
    residual = rhs_rescaled(W, params, config.solver.boundary).values[:, grid.interior_mask]
    max_residual = float(np.max(np.abs(residual)))
    return {
        "status": "pass" if max_residual <= STATIONARY_TOLERANCE else "fail",
        "kappa": kappa.tolist(),
        "max_interior_residual": max_residual,
        "energy": global_energy(W, params),
    }


def _suite_identities(config: ExperimentConfig, params: SystemParams) -> Dict[str, object]:
    levels = config.verify.refinement_levels
    factor = config.monitors.identity_tolerance_factor * config.monitors.tolerance_scale
    cutoff = CutoffProfile(radius=config.monitors.cutoff_radii[0])
    closure = config.solver.boundary
    ds_cap = _stable_base_step(config, levels)
    short = _short_config(config)

    per_level = []
    for k in range(levels):
        traj = _rescaled_run(short, params, refinements=k, ds_cap=ds_cap)
        local_mass, local_energy = check_local_identities(traj, cutoff, params, closure, factor)
        per_level.append(
            [
                check_identity_mass(traj, params, factor),
                check_identity_dissipation(traj, params, closure, factor),
                local_mass,
                local_energy,
            ]
        )

    result: Dict[str, object] = {
        "levels": [[report.to_dict() for report in reports] for reports in per_level],
    }
    if levels < 2:
        result["convergence"] = []
        result["status"] = "inconclusive"
        result["reason"] = "convergence order needs at least two resolutions"
        return result
    studies = [
        convergence_order(coarse, fine)
        for coarse_reports, fine_reports in zip(per_level[:-1], per_level[1:])
        for coarse, fine in zip(coarse_reports, fine_reports)
    ]
    statuses = {study.status for study in studies}
    result["convergence"] = [study.to_dict() for study in studies]
    result["status"] = "fail" if "fail" in statuses else ("pass" if "pass" in statuses else "inconclusive")
    return result


def _short_config(config: ExperimentConfig) -> ExperimentConfig:
    """Same experiment integrated only over verify.s_span."""
    s0 = -math.log(config.solver.T)
    return replace(config, solver=replace(config.solver, s_max=s0 + config.verify.s_span))


def _suite_monitors(
    config: ExperimentConfig, params: SystemParams, traj: RescaledTrajectory
) -> Dict[str, object]:
    monitors = config.monitors
    tolerance = monitors.tolerance * monitors.tolerance_scale
    cutoff = CutoffProfile(radius=monitors.cutoff_radii[0])
    constants = _constants_for(params)
    reports = [
        monitor_bounds(traj, R, q, params, constants, cutoff, tolerance, config.solver.boundary)
        for R, q in product(monitors.ball_radii, monitors.q_values)
    ]
    T = config.solver.T
    U0 = build_initial_field(config, build_grid(config), params)
    y_grid = U0.grid.scaled(min(1.0, 1.0 / math.sqrt(T)))
    initial = initial_energy_bound(U0, [(0.0,) * params.space_dim], T, params, y_grid)
    return {
        "status": "pass" if all(report.passed for report in reports) else "fail",
        "reports": [report.to_dict() for report in reports],
        "initial_energy": initial.to_dict(),
    }


def _suite_subsolution(
    config: ExperimentConfig, params: SystemParams, traj: RescaledTrajectory
) -> Dict[str, object]:
    monitors = config.monitors
    factor = monitors.identity_tolerance_factor * monitors.tolerance_scale
    bumps = bump_family(traj.grid, monitors.bump_count)
    sup_w = max(float(np.max(np.sum(np.abs(frame.W.values), axis=0))) for frame in traj)
    exclusion = monitors.mask_fraction * sup_w if sup_w > 0 else monitors.mask_fraction
    report = subsolution_residual(traj, params, exclusion, bumps, factor)
    parts = component_part_residual(traj, params, bumps, factor)
    parts_ok = all(part.passed for part in parts)
    result = report.to_dict()
    result["sign_parts"] = [
        {"component": part.component, "sign": part.sign, "max": part.max_residual, "bump": part.bump,
         "s": part.witness_s, "passed": part.passed}
        for part in parts
    ]
    result["status"] = "pass" if report.status == "pass" and parts_ok else "fail"
    return result


def cmd_verify(config: ExperimentConfig, threads: int = 1) -> int:
    """Run every verification suite and write verify.json."""
    _banner("VERIFICATION SUITES")
    params = system_params(config)
    traj = _rescaled_run(config, params)
    out = _output_dir(config)
    dump_config(config, out / "config.yaml")

    suites: List[Tuple[str, Callable[[], Dict[str, object]]]] = [
        ("structure", lambda: _suite_structure(config, params)),
        ("stationary", lambda: _suite_stationary(config, params)),
        ("identities", lambda: _suite_identities(config, params)),
        ("monitors", lambda: _suite_monitors(config, params, traj)),
        ("subsolution", lambda: _suite_subsolution(config, params, traj)),
    ]
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        futures = [(name, pool.submit(suite)) for name, suite in suites]
        results: Dict[str, Dict[str, object]] = {}
        for name, future in futures:
            try:
                results[name] = future.result()
            except LabError as exc:
                logger.error(f"[Verify] Suite {name} raised: {exc}")
                results[name] = {"status": "fail", "error": str(exc)}

    statuses = {name: str(result["status"]) for name, result in results.items()}
    write_json(out / "verify.json", {"params": params.to_dict(), "seed": config.seed, "suites": results})

    print("\nSuite Results:")
    _print_checks(statuses)
    print(f"\nArtifacts saved to: {out}")
    return EXIT_VERIFICATION if "fail" in statuses.values() else EXIT_OK


# ----------------------------------------------------------------------
# exponents
# ----------------------------------------------------------------------
def cmd_exponents(args: argparse.Namespace, config: Optional[ExperimentConfig]) -> int:
    """Print the exponent schedule and bootstrap chain as JSON."""
    p = args.p
    if p is None:
        p = 2.0 * config.system.r + 1.0 if config is not None else None
    if p is None:
        print("ERROR: --p (or --config) is required", file=sys.stderr)
        return EXIT_VALIDATION
    dim = args.dim if args.dim is not None else (config.system.space_dim if config is not None else 1)

    schedule = exponent_schedule(p, args.q, qbar=args.qbar, lam=args.lam)
    q_target = args.q_target if args.q_target is not None else args.q
    chain = bootstrap_chain(p, q_target, args.r_target)
    m = len(chain) - 1
    payload = {
        "regime": exponent_regime(float(p), dim),
        "schedule": schedule.to_dict(),
        "chain": {
            "m": m,
            "q_target": q_target,
            "R_target": args.r_target,
            "R0_over_R_target": chain[0].R / args.r_target,
            "stages": [{"q": float(stage.q), "q_exact": str(stage.q), "R": stage.R} for stage in chain],
        },
    }
    if args.out is not None:
        write_json(Path(args.out) / "schedule.json", payload)
    print(json.dumps(_make_json_safe(payload), indent=2, sort_keys=True))
    return EXIT_OK


# ----------------------------------------------------------------------
# Entry point
# ----------------------------------------------------------------------
def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Blow-up laboratory for coupled parabolic systems")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=str, help="YAML experiment file")
    common.add_argument("--out", type=str, help="Output directory (overrides outputs.directory)")
    common.add_argument("--seed", type=int, help="Random seed (overrides seed)")
    common.add_argument("--threads", type=int, default=1, help="Worker threads for verify")
    common.add_argument("--tolerance-scale", type=float, help="Multiply every tolerance by this factor")
    common.add_argument("--verbose", action="store_true", help="Debug logging")

    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", parents=[common], help="Physical run to blow-up")
    sub.add_parser("rescaled", parents=[common], help="Self-similar run with monitors")
    sub.add_parser("verify", parents=[common], help="Verification suites")
    exponents = sub.add_parser("exponents", parents=[common], help="Exponent schedule and bootstrap chain")
    exponents.add_argument("--p", type=float, help="Exponent p = 2r + 1")
    exponents.add_argument("--q", type=float, default=2.0, help="Current integrability exponent")
    exponents.add_argument("--qbar", type=float, help="Target exponent of one step")
    exponents.add_argument("--lambda", dest="lam", type=float, help="Interpolation exponent")
    exponents.add_argument("--q-target", type=float, help="Final exponent of the chain")
    exponents.add_argument("--r-target", type=float, default=1.0, help="Final radius of the chain")
    exponents.add_argument("--dim", type=int, help="Space dimension for the regime classification")
    sub.add_parser("report", parents=[common], help="Render charts from an output directory")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    _configure_logging(args.verbose)

    try:
        config = load_config(args.config) if args.config else None
        if args.command == "exponents":
            return cmd_exponents(args, config)

        config = (config or ExperimentConfig()).with_overrides(
            seed=args.seed, output_dir=args.out, tolerance_scale=args.tolerance_scale
        )
        if args.command == "simulate":
            return cmd_simulate(config)
        if args.command == "rescaled":
            return cmd_rescaled(config)
        if args.command == "verify":
            return cmd_verify(config, args.threads)
        charts = render_report(config.outputs.directory)
        _banner("REPORT")
        for chart in charts:
            print(f"  Chart saved to: {chart}")
        return EXIT_OK

    except ConfigError as exc:
        print("\nConfiguration is invalid:", file=sys.stderr)
        print(str(exc), file=sys.stderr)
        return EXIT_VALIDATION
    except (BlowupOverflow, InstabilityError, ResamplingError, WindowError) as exc:
        print(f"\nNUMERICAL BREAKDOWN: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (LabError, FileNotFoundError) as exc:
        print(f"\nERROR: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
