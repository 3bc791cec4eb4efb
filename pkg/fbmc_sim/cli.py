"""
Command-Line Runner
===================

Runs the simulator stages or the complete paired study:
1. d2          D-2 base case
2. capacity    flow-based parameters for both CNEC sets
3. d1-shc      market coupling, standard hybrid coupling
4. d1-ahc      market coupling, advanced hybrid coupling
5. d0          congestion management for the selected setup(s)
6. full-study  all of the above plus the comparative report

Usage:
    python run.py run --grid data/bundled --study --seed 42 --hours 168
    python run.py run --grid data/bundled --stage d1-ahc --out runs/demo
    python run.py make-grid --out data/bundled

Exit codes: 0 success, 2 usage error or missing prerequisite stage, 3 grid or
sensitivity data error, 4 solver failure.
"""

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import artifacts
from .capacity_calc import run_capacity_calculation, select_hours
from .config import ScenarioConfig, Setup, parse_hours
from .dispatch_models import (account_costs, audit_d0, audit_d1, audit_d2, solve_d0,
                              solve_d1_ahc, solve_d1_shc, solve_d2)
from .errors import GridDataError, SensitivityError, SolverError, StageDependencyError
from .grid_model import load_grid
from .sensitivity import build_sensitivities, dump_sensitivities
from .study import prepare_grid, run_paired_study, write_report

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_SOLVER = 4

STAGES = ("d2", "capacity", "d1-shc", "d1-ahc", "d0", "full-study")
MANIFEST_PATH_KEYS = ("grid", "out")


def _setups(choice):
    return list(Setup) if choice == "both" else [Setup(choice)]


def stage_requirements(stage, out, setups):
    """Artifact files a stage reads from earlier runs."""
    out = Path(out)
    if stage == "capacity":
        return [out / "d2" / "meta.json"]
    if stage == "d1-shc":
        return [out / "capacity" / "capacity_shc.csv"]
    if stage == "d1-ahc":
        return [out / "capacity" / "capacity_ahc.csv"]
    if stage == "d0":
        return [out / f"d1_{s.value}" / "meta.json" for s in setups]
    return []


def check_prerequisites(stage, out, setups):
    for path in stage_requirements(stage, out, setups):
        if not path.exists():
            raise StageDependencyError(f"stage {stage} needs {path}; run the earlier stage first",
                                       stage=stage)


def resolve_config(args, manifest):
    """defaults < grid config.json < manifest < flags."""
    config = ScenarioConfig.from_file(Path(args.grid) / "config.json")
    scenario = {k: v for k, v in manifest.items() if k not in MANIFEST_PATH_KEYS}
    if scenario:
        config = ScenarioConfig.from_dict(scenario, base=config)

    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.hours is not None:
        overrides["hours"] = parse_hours(args.hours)
    if args.threshold is not None:
        overrides["threshold"] = args.threshold
    if args.minram is not None:
        overrides["minram_factor"] = args.minram
    if args.core_floor is not None:
        overrides["core_floor"] = args.core_floor
    if args.frm_default is not None:
        overrides["frm_default"] = args.frm_default
    if overrides:
        config = ScenarioConfig.from_dict(overrides, base=config)
    if args.curt_penalty is not None:
        config = replace(config, penalties=replace(config.penalties, curtailment_d0=args.curt_penalty))
    return config


def read_manifest(path):
    if path is None:
        return {}
    path = Path(path)
    if not path.exists():
        raise GridDataError(f"manifest not found: {path}")
    with open(path, "r") as f:
        try:
            data = json.load(f)
        except json.JSONDecodeError as e:
            raise GridDataError(f"manifest {path} is not valid JSON: {e}")
    if not isinstance(data, dict):
        raise GridDataError(f"manifest {path} must hold a JSON object")
    return data


# ---------------------------------------------------------------------------
# stages
# ---------------------------------------------------------------------------

def _lp_dir(args, name):
    return Path(args.out) / "lp" / name if args.export_lp else None


def stage_d2(grid, sens, config, args):
    print("\n=== D-2 BASE CASE ===")
    d2 = solve_d2(grid, config.hours, config, lp_dir=_lp_dir(args, "d2"))
    artifacts.save_market(d2, grid, Path(args.out) / "d2")
    artifacts.write_json(audit_d2(grid, d2), Path(args.out) / "d2" / "audit.json")
    print(f"Base case cost: {d2.objective.sum():,.0f} EUR, hash {artifacts.solution_hash(d2)[:12]}")


def stage_capacity(grid, sens, config, args):
    d2 = artifacts.load_market(grid, Path(args.out) / "d2")
    for setup in Setup:
        print(f"\n=== CAPACITY CALCULATION ({setup.value.upper()}) ===")
        cp = run_capacity_calculation(grid, sens, d2, config, setup)
        artifacts.save_capacity(cp, sens.cnecs[setup], Path(args.out) / "capacity", setup)


def stage_d1(grid, sens, config, args, setup):
    cnecs = sens.cnecs[setup]
    cp = artifacts.load_capacity(Path(args.out) / "capacity", cnecs, setup)
    try:
        cp = select_hours(cp, config.hours)
    except ValueError as e:
        raise StageDependencyError(f"capacity artifacts do not cover the requested hours: {e}",
                                   stage=f"d1-{setup.value}")
    print(f"\n=== MARKET COUPLING ({setup.value.upper()}) ===")
    solver = solve_d1_shc if setup == Setup.SHC else solve_d1_ahc
    d1 = solver(grid, cnecs, cp.ram[setup], cp.hours, config,
                lp_dir=_lp_dir(args, f"d1_{setup.value}"))
    directory = Path(args.out) / f"d1_{setup.value}"
    artifacts.save_market(d1, grid, directory)
    artifacts.write_json(audit_d1(grid, d1, cnecs, cp.ram[setup]), directory / "audit.json")
    print(f"Market cost: {d1.objective.sum():,.0f} EUR over {len(d1.hours)} hours")


def stage_d0(grid, sens, config, args, setup):
    d1 = artifacts.load_market(grid, Path(args.out) / f"d1_{setup.value}")
    hours = [h for h in config.hours if h in d1.hours]
    if not hours:
        raise StageDependencyError(f"d1_{setup.value} covers none of the requested hours", stage="d0")
    print(f"\n=== CONGESTION MANAGEMENT ({setup.value.upper()}) ===")
    d0 = solve_d0(grid, sens.lc, d1, hours=hours, config=config,
                  lp_dir=_lp_dir(args, f"d0_{setup.value}"))
    directory = Path(args.out) / f"d0_{setup.value}"
    artifacts.save_d0(d0, grid, directory)
    artifacts.write_json(audit_d0(grid, d0, d1, sens.lc), directory / "audit.json")
    costs = account_costs(grid, d1, d0, config.penalties)
    costs.by_zone.to_csv(directory / "costs.csv", index=False)
    print(f"Redispatch: {d0.rd_pos.sum() + d0.rd_neg.sum():,.0f} MWh, "
          f"CM cost: {costs.cm_cost:,.0f} EUR, total: {costs.total_cost:,.0f} EUR")


def save_study_artifacts(report, grid, out):
    """Stage artifacts of a full study, so single stages can be re-run afterwards."""
    out = Path(out)
    artifacts.save_market(report.d2, grid, out / "d2")
    for setup, run in report.runs.items():
        artifacts.save_capacity(run.capacity, report.sens.cnecs[setup], out / "capacity", setup)
        artifacts.save_market(run.d1, grid, out / f"d1_{setup.value}")
        artifacts.save_d0(run.d0, grid, out / f"d0_{setup.value}")
        run.costs.by_zone.to_csv(out / f"d0_{setup.value}" / "costs.csv", index=False)


# ---------------------------------------------------------------------------
# sub-commands
# ---------------------------------------------------------------------------

def cmd_run(args):
    manifest = read_manifest(args.manifest)
    args.grid = args.grid or manifest.get("grid")
    args.out = args.out or manifest.get("out") or "runs/latest"
    if args.grid is None:
        raise StageDependencyError("no grid given (use --grid or a manifest with 'grid')")
    stage = "full-study" if args.study else args.stage
    setups = _setups(args.setup)

    check_prerequisites(stage, args.out, setups)
    config = resolve_config(args, manifest)
    try:
        raw = load_grid(args.grid, frm_default=config.frm_default)
        grid = prepare_grid(raw, config)
    except GridDataError as e:
        if e.stage is not None:
            raise
        raise GridDataError(str(e), stage=stage) from e
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    artifacts.write_json(config.to_dict(), out / "config_resolved.json")

    print("FLOW-BASED MARKET COUPLING SIMULATOR")
    print("=" * 60)
    print(f"Grid: {args.grid} {grid.summary()}")
    print(f"Stage: {stage}, output: {out}")

    if stage == "full-study":
        report = run_paired_study(raw, config, lp_dir=out / "lp" if args.export_lp else None)
        save_study_artifacts(report, grid, out)
        write_report(report, out)
        if args.dump_sensitivities:
            dump_sensitivities(report.sens, out / "sensitivities")
    else:
        sens = build_sensitivities(grid, config)
        if args.dump_sensitivities:
            dump_sensitivities(sens, out / "sensitivities")
        if stage == "d2":
            stage_d2(grid, sens, config, args)
        elif stage == "capacity":
            stage_capacity(grid, sens, config, args)
        elif stage == "d1-shc":
            stage_d1(grid, sens, config, args, Setup.SHC)
        elif stage == "d1-ahc":
            stage_d1(grid, sens, config, args, Setup.AHC)
        elif stage == "d0":
            for setup in setups:
                stage_d0(grid, sens, config, args, setup)

    if args.plots:
        from .visualization import plot_run
        plot_run(out)

    print(f"\n{'=' * 60}")
    print("RUN COMPLETE")
    print(f"{'=' * 60}")
    return EXIT_OK


def cmd_make_grid(args):
    from .synthetic_grid import write_test_network
    write_test_network(args.out, hours=args.hours, seed=args.seed)
    print(f"Test network written to {args.out}")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="fbmc-sim",
                                     description="Flow-based market coupling with hybrid coupling")
    parser.add_argument("-v", "--verbose", action="store_true", help="Debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="Run simulator stages or the full study")
    run.add_argument("--grid", help="Grid directory (CSV file set)")
    run.add_argument("--out", help="Output directory (default: runs/latest)")
    run.add_argument("--manifest", help="Study manifest JSON (paths and scenario overrides)")
    run.add_argument("--stage", choices=STAGES, default="full-study")
    run.add_argument("--study", action="store_true", help="Shortcut for --stage full-study")
    run.add_argument("--setup", choices=("shc", "ahc", "both"), default="both",
                     help="Setup(s) for the d0 stage")
    run.add_argument("--seed", type=int)
    run.add_argument("--hours", type=int, help="Horizon length, hours 1..N")
    run.add_argument("--threshold", type=float, help="CNE selection threshold")
    run.add_argument("--minram", type=float, help="minRAM factor")
    run.add_argument("--core-floor", type=float, help="Core RAM floor factor")
    run.add_argument("--frm-default", type=float, help="FRM share for lines without frm")
    run.add_argument("--curt-penalty", type=float, help="D-0 curtailment penalty (EUR/MWh)")
    run.add_argument("--plots", action="store_true", help="Write figures after the run")
    run.add_argument("--dump-sensitivities", action="store_true",
                     help="Write PTDF, LODF, GSK and CNEC tables")
    run.add_argument("--export-lp", action="store_true", help="Write every hourly LP in LP format")
    run.add_argument("-v", "--verbose", action="store_true", dest="run_verbose",
                     help=argparse.SUPPRESS)
    run.set_defaults(func=cmd_run)

    grid = sub.add_parser("make-grid", help="Write the bundled test network")
    grid.add_argument("--out", required=True, help="Target grid directory")
    grid.add_argument("--hours", type=int, default=168)
    grid.add_argument("--seed", type=int, default=7)
    grid.set_defaults(func=cmd_make_grid)
    return parser


def main(argv=None):
    """Parse ``argv``, run the sub-command and return the exit status."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_USAGE

    verbose = args.verbose or getattr(args, "run_verbose", False)
    logging.basicConfig(level=logging.DEBUG if verbose else logging.INFO,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")

    try:
        return args.func(args)
    except StageDependencyError as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (GridDataError, SensitivityError, FileNotFoundError) as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_DATA
    except SolverError as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
