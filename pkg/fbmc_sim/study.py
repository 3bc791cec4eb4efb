"""
Paired Study
============

Runs the complete experiment on one grid:
1. D-2 forecast uncertainty on the renewables
2. D-2 base case (shared by both setups)
3. Capacity calculation, D-1 market coupling and D-0 congestion management,
   once for SHC and once for AHC
4. Comparative analyses: costs, UAF forecast error, exchange deltas, line
   loadings, flow-based domains

Methodology:
- Forecast: ren_d2 = ren * max(1 + sigma * z, 0), z ~ N(0, 1), sigma per zone kind
- UAF deviation per CNE and hour: (S x_d1 - S x_d2) / fmax with S the UAF
  sensitivity of the border exchanges
- Directional checks warn (never fail) when AHC is not cheaper than SHC
"""

import logging
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import shortest_path
from scipy.stats import spearmanr

from .artifacts import solution_hash, write_json
from .capacity_calc import (amr_invariance_check, minram_check, run_capacity_calculation,
                            uaf_sensitivity)
from .config import ScenarioConfig, Setup
from .dispatch_models import (account_costs, audit_d0, audit_d1, audit_d2, d1_line_flows,
                              solve_d0, solve_d1_ahc, solve_d1_shc, solve_d2)
from .domains import domain_projection
from .grid_model import ZoneKind, derive_virtual_zones
from .sensitivity import build_gsk, build_sensitivities, zonal_ptdf

logger = logging.getLogger(__name__)

COST_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class SetupRun:
    setup: Setup
    capacity: object  # CapacityParams
    d1: object  # D1Solution
    d0: object  # D0Solution
    costs: object  # CostReport
    audits: dict
    minram: pd.DataFrame


@dataclass(eq=False)
class StudyReport:
    config: ScenarioConfig
    grid_summary: dict
    sens: object  # SensitivitySet
    d2: object  # D2Solution
    d2_hash: str
    runs: dict  # Setup -> SetupRun
    fuaf_deviation: pd.DataFrame = None
    flow_decomposition: pd.DataFrame = None
    exchange_delta: pd.DataFrame = None
    max_flows: pd.DataFrame = None
    domains: dict = field(default_factory=dict)  # (Setup, hour) -> DomainPolygon
    vbz_correlation: dict = field(default_factory=dict)
    checks: dict = field(default_factory=dict)

    def results_frame(self):
        frames = []
        for setup, run in self.runs.items():
            df = run.costs.by_zone.copy()
            df.insert(0, "setup", setup.value)
            frames.append(df)
        return pd.concat(frames, ignore_index=True)

    def summary(self):
        """Machine-readable digest written to summary.json."""
        costs = {}
        for setup, run in self.runs.items():
            costs[setup.value] = {
                "fb_cost": run.costs.fb_cost,
                "non_fb_cost": run.costs.non_fb_cost,
                "total_cost": run.costs.total_cost,
                "generation_cost": run.costs.generation_cost,
                "cm_cost": run.costs.cm_cost,
                "redispatch_mwh": float(run.d0.rd_pos.sum() + run.d0.rd_neg.sum()),
                "curtailment_d0_mwh": float(run.d0.curtailment.sum()),
            }
        return {
            "config": self.config.to_dict(),
            "grid": self.grid_summary,
            "d2_hash": self.d2_hash,
            "cnes": {s.value: len(self.sens.cnecs[s].cne_ids) for s in Setup},
            "cnecs": {s.value: len(self.sens.cnecs[s]) for s in Setup},
            "lc_size": len(self.sens.lc),
            "costs": costs,
            "audits": {s.value: run.audits for s, run in self.runs.items()},
            "minram": {s.value: run.minram.to_dict("records") for s, run in self.runs.items()},
            "vbz_correlation": self.vbz_correlation,
            "checks": self.checks,
        }


# ---------------------------------------------------------------------------
# D-2 uncertainty
# ---------------------------------------------------------------------------

def draw_factors(rng, sigma, shape):
    """Forecast factors 1 + sigma * z; sigma may broadcast over the last axis."""
    return 1.0 + np.asarray(sigma, dtype=float) * rng.standard_normal(shape)


def draw_forecast_factors(grid, config):
    """hours x nodes factors with the zone-kind sigma, seeded by ``config.seed``."""
    rng = np.random.default_rng(config.seed)
    sigma = np.where(grid.fb_node_mask, config.sigma_fb, config.sigma_nonfb)
    return draw_factors(rng, sigma, grid.series.res_available.shape)


def perturb_res(grid, config):
    """
    D-2 renewable forecast: true availability times a non-negative factor.

    Args:
        grid (GridModel): Grid with the true RES series.
        config (ScenarioConfig): seed, sigma_fb, sigma_nonfb.

    Returns:
        np.ndarray: hours x nodes forecast.
    """
    factors = draw_forecast_factors(grid, config)
    return grid.series.res_available * np.maximum(factors, 0.0)


# ---------------------------------------------------------------------------
# analyses
# ---------------------------------------------------------------------------

def fuaf_deviation(cp, d1, cnecs, grid):
    """
    UAF forecast error per CNE and hour as a share of fmax.

    Compares the UAF implied by the realised D-1 exchanges with the D-2 UAF
    reserved in the capacity calculation. Only the n-0 entries (CNEs) count.

    Returns:
        pd.DataFrame: hour, cne, deviation.
    """
    rows = [d1.row(h) for h in cp.hours]
    sens = uaf_sensitivity(cnecs, grid, build_gsk(grid, Setup.SHC))
    realised = d1.exchange[rows] @ sens.T
    deviation = (realised - cp.fuaf) / cnecs.fmax
    mask = cnecs.n0_mask
    cnes = [m for m, keep in zip(cnecs.monitored, mask) if keep]
    values = deviation[:, mask]
    return pd.DataFrame({
        "hour": np.repeat(cp.hours, len(cnes)),
        "cne": cnes * len(cp.hours),
        "deviation": values.reshape(-1),
    })


def flow_decomposition(cp, d1, cnecs, grid):
    """
    Mean absolute flow components per CNE for one setup's market result.

    SHC: f0_fb = f0_all + fuaf is fixed before trading, FB trade flows come
    from the physical zones. AHC: only f0_all is fixed, trade flows include
    the VBZ net positions.
    """
    setup = d1.setup
    rows = [d1.row(h) for h in cp.hours]
    if setup == Setup.AHC:
        grid = derive_virtual_zones(grid)
        positions = np.hstack([d1.net_position, d1.vbz_position])[rows]
        uaf = np.zeros_like(cp.fuaf)
    else:
        positions = d1.net_position[rows]
        uaf = cp.fuaf
    ptdf_z = zonal_ptdf(cnecs.ptdf, cnecs.ids, build_gsk(grid, setup))
    trade = positions @ ptdf_z.matrix.T
    mask = cnecs.n0_mask
    return pd.DataFrame({
        "setup": setup.value,
        "cne": [m for m, keep in zip(cnecs.monitored, mask) if keep],
        "f0_all": np.abs(cp.f0_all[:, mask]).mean(axis=0),
        "uaf": np.abs(uaf[:, mask]).mean(axis=0),
        "fb_trade": np.abs(trade[:, mask]).mean(axis=0),
    })


def exchange_delta(d1_shc, d1_ahc, grid):
    """
    Hourly change of the NTC exchange volume (AHC - SHC) against FB RES feed-in.

    Hours are split into high/low FB load relative to the mean.
    """
    if d1_shc.hours != d1_ahc.hours:
        raise ValueError("SHC and AHC results cover different hours")
    t = np.asarray(d1_shc.hours) - 1
    mask = grid.fb_node_mask
    fb_res = (d1_shc.res - d1_shc.curtailment)[:, mask].sum(axis=1)
    fb_load = grid.series.demand[t][:, mask].sum(axis=1)
    delta = np.abs(d1_ahc.exchange).sum(axis=1) - np.abs(d1_shc.exchange).sum(axis=1)
    return pd.DataFrame({
        "hour": d1_shc.hours,
        "exchange_delta": delta,
        "fb_res": fb_res,
        "fb_load": fb_load,
        "load_class": np.where(fb_load >= fb_load.mean(), "high", "low"),
    })


def max_flows(grid, sens, runs):
    """Per line and setup: max |n-1 flow| / (fmax - frm) after D-1 and after D-0."""
    lc = sens.lc
    limit = lc.fmax - lc.frm
    frames = []
    for setup, run in runs.items():
        loading_d1 = np.abs(d1_line_flows(grid, run.d1, lc)) / limit
        loading_d0 = np.abs(run.d0.flows) / limit
        df = pd.DataFrame({
            "line": lc.monitored,
            "d1": loading_d1.max(axis=0),
            "d0": loading_d0.max(axis=0),
        }).groupby("line", sort=False, as_index=False).max()
        df.insert(0, "setup", setup.value)
        df["overloaded_d1"] = df["d1"] > 1.0 + 1e-9
        frames.append(df)
    return pd.concat(frames, ignore_index=True)


def hop_distance_to_borders(grid):
    """Per line: fewest line hops from either end to a border end node."""
    index = grid.node_index
    rows = [index[l.from_node] for l in grid.lines]
    cols = [index[l.to_node] for l in grid.lines]
    n = len(grid.nodes)
    adjacency = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n)).tocsr()
    ends = sorted({index[node] for b in grid.borders for node, _ in b.end_nodes})
    if not ends:
        return pd.Series(np.inf, index=list(grid.line_ids))
    dist = shortest_path(adjacency, directed=False, unweighted=True, indices=ends).min(axis=0)
    return pd.Series([min(dist[r], dist[c]) for r, c in zip(rows, cols)], index=list(grid.line_ids))


def vbz_proximity_correlation(deviation, grid):
    """
    Spearman correlation between the spread of the UAF deviation per CNE and
    its hop distance to the nearest interconnector end node.

    A negative rho means CNEs close to the VBZ nodes see the widest errors.
    """
    spread = deviation.groupby("cne", sort=False)["deviation"].agg(
        lambda s: s.quantile(0.95) - s.quantile(0.05))
    distance = hop_distance_to_borders(grid).reindex(spread.index)
    if len(spread) < 3 or spread.nunique() < 2 or distance.nunique() < 2:
        return {"rho": None, "pvalue": None, "n": int(len(spread))}
    result = spearmanr(distance.to_numpy(), spread.to_numpy())
    return {"rho": float(result[0]), "pvalue": float(result[1]), "n": int(len(spread))}


def study_domains(grid, sens, capacity, d2, config, setup):
    """Domain polygons of one setup for the configured domain hours."""
    if len(grid.fb_zones) != 3:
        logger.warning("Domain projection needs three FB zones, grid has %d", len(grid.fb_zones))
        return {}
    setup = Setup(setup)
    cnecs = sens.cnecs[setup]
    ptdf_z = zonal_ptdf(cnecs.ptdf, cnecs.ids, sens.gsk[setup]).matrix
    ram = capacity.ram[setup]
    polygons = {}
    for hour in config.resolved_domain_hours():
        if hour not in capacity.hours:
            continue
        k = capacity.hours.index(hour)
        fixed = None
        if setup == Setup.AHC:
            fixed = np.zeros(len(grid.virtual_zones))
            if config.domain_vbz_mode == "forecast":
                borders = [grid.border_index[grid.zone_by_id[z].attached_border]
                           for z in grid.virtual_zones]
                fixed = d2.exchange[d2.row(hour), borders]
        polygons[(setup, hour)] = domain_projection(ptdf_z, ram.pos[k], ram.neg[k], fixed)
    return polygons


def directional_checks(runs):
    """AHC should not be more expensive than SHC; violations only warn."""
    shc, ahc = runs[Setup.SHC].costs, runs[Setup.AHC].costs
    checks = {
        "fb_cost_ahc_le_shc": ahc.fb_cost <= shc.fb_cost * (1 + COST_TOL) + COST_TOL,
        "total_cost_ahc_le_shc": ahc.total_cost <= shc.total_cost * (1 + COST_TOL) + COST_TOL,
    }
    for name, ok in checks.items():
        if not ok:
            warnings.warn(f"directional check {name} failed", RuntimeWarning)
    return checks


# ---------------------------------------------------------------------------
# orchestration
# ---------------------------------------------------------------------------

def prepare_grid(grid, config):
    """NTC overrides, virtual zones and the D-2 forecast on a fresh copy."""
    grid = derive_virtual_zones(grid.with_ntc(config.ntc_overrides))
    return grid.with_forecast(perturb_res(grid, config))


def run_setup(grid, sens, d2, config, setup, lp_dir=None):
    """Capacity calculation, D-1 and D-0 for one hybrid-coupling setup."""
    setup = Setup(setup)
    label = setup.value.upper()
    print(f"\n=== CAPACITY CALCULATION ({label}) ===")
    cp = run_capacity_calculation(grid, sens, d2, config, setup)
    cnecs = sens.cnecs[setup]
    lp_d1 = Path(lp_dir) / f"d1_{setup.value}" if lp_dir else None
    lp_d0 = Path(lp_dir) / f"d0_{setup.value}" if lp_dir else None

    print(f"\n=== MARKET COUPLING ({label}) ===")
    if setup == Setup.SHC:
        d1 = solve_d1_shc(grid, cnecs, cp.ram[setup], d2.hours, config, lp_dir=lp_d1)
    else:
        d1 = solve_d1_ahc(grid, cnecs, cp.ram[setup], d2.hours, config, lp_dir=lp_d1)
    print(f"Market cost: {d1.objective.sum():,.0f} EUR over {len(d1.hours)} hours")

    print(f"\n=== CONGESTION MANAGEMENT ({label}) ===")
    d0 = solve_d0(grid, sens.lc, d1, config=config, lp_dir=lp_d0)
    costs = account_costs(grid, d1, d0, config.penalties)
    print(f"Redispatch: {d0.rd_pos.sum() + d0.rd_neg.sum():,.0f} MWh, "
          f"curtailment: {d0.curtailment.sum():,.0f} MWh, CM cost: {costs.cm_cost:,.0f} EUR")

    audits = {
        "capacity": amr_invariance_check(cp),
        "d1": audit_d1(grid, d1, cnecs, cp.ram[setup]),
        "d0": audit_d0(grid, d0, d1, sens.lc),
    }
    minram = minram_check(cp, cnecs.fmax, config.minram_factor, config.core_floor)
    return SetupRun(setup, cp, d1, d0, costs, audits, minram)


def run_paired_study(grid, config, lp_dir=None):
    """
    SHC and AHC on one shared D-2 base case.

    Args:
        grid (GridModel): Input grid (true RES series).
        config (ScenarioConfig): Study parameters.
        lp_dir (Path): Optional LP export directory.

    Returns:
        StudyReport
    """
    print("=== FLOW-BASED MARKET COUPLING STUDY ===")
    grid = prepare_grid(grid, config)
    print(f"Grid: {grid.summary()}")
    sens = build_sensitivities(grid, config)

    print("\n=== D-2 BASE CASE ===")
    d2 = solve_d2(grid, config.hours, config, lp_dir=Path(lp_dir) / "d2" if lp_dir else None)
    d2_hash = solution_hash(d2)
    print(f"Base case cost: {d2.objective.sum():,.0f} EUR, hash {d2_hash[:12]}")

    runs = {}
    for setup in Setup:
        runs[setup] = run_setup(grid, sens, d2, config, setup, lp_dir)
        runs[setup].audits["d2"] = audit_d2(grid, d2)
        if solution_hash(d2) != d2_hash:
            raise RuntimeError("D-2 base case changed between the SHC and AHC branches")

    report = StudyReport(config, grid.summary(), sens, d2, d2_hash, runs)
    report.fuaf_deviation = fuaf_deviation(runs[Setup.SHC].capacity, runs[Setup.SHC].d1,
                                           sens.cnecs[Setup.SHC], grid)
    report.flow_decomposition = pd.concat([
        flow_decomposition(run.capacity, run.d1, sens.cnecs[setup], grid)
        for setup, run in runs.items()
    ], ignore_index=True)
    report.exchange_delta = exchange_delta(runs[Setup.SHC].d1, runs[Setup.AHC].d1, grid)
    report.max_flows = max_flows(grid, sens, runs)
    for setup, run in runs.items():
        report.domains.update(study_domains(grid, sens, run.capacity, d2, config, setup))
    report.vbz_correlation = vbz_proximity_correlation(report.fuaf_deviation, grid)
    report.checks = directional_checks(runs)
    report.checks["pairing_hash_stable"] = True

    print("\n=== RESULTS ===")
    for setup, run in runs.items():
        print(f"  {setup.value.upper()}: FB region {run.costs.fb_cost:,.0f} EUR, "
              f"non-FB {run.costs.non_fb_cost:,.0f} EUR, total {run.costs.total_cost:,.0f} EUR")
    return report


def write_report(report, directory):
    """summary.json plus one CSV per figure analogue."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    write_json(report.summary(), directory / "summary.json")
    report.results_frame().to_csv(directory / "fig_results.csv", index=False)
    report.fuaf_deviation.to_csv(directory / "fig_fuaf_dev.csv", index=False)
    report.exchange_delta.to_csv(directory / "fig_exchange_delta.csv", index=False)
    report.max_flows.to_csv(directory / "fig_max_flows.csv", index=False)
    report.flow_decomposition.to_csv(directory / "fig_flow_decomposition.csv", index=False)

    domain_dir = directory / "domains"
    domain_dir.mkdir(exist_ok=True)
    for (setup, hour), polygon in sorted(report.domains.items(), key=lambda kv: (kv[0][0].value, kv[0][1])):
        df = polygon.frame()
        df["bounded"] = polygon.bounded
        df.to_csv(domain_dir / f"{setup.value}_h{hour:04d}.csv", index=False)
    logger.info("Report written to %s", directory)
