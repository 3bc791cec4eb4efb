"""
Dispatch Models
===============

The four hourly LPs of the simulation chain:

1. D-2 base case: zonal dispatch on the RES forecast with NTC-limited borders
2. D-1 market coupling, standard hybrid coupling (SHC): FB constraints on the
   physical FB zones, NTC exchanges enter the FB zone balances
3. D-1 market coupling, advanced hybrid coupling (AHC): NTC exchanges become
   net positions of virtual bidding zones inside the FB constraints
4. D-0 congestion management: redispatch and curtailment against n-1 flows
   on the contingency-extended line set

Sign conventions:
- EX[b] > 0: the non-FB zone of border b exports into the FB area
- NP[z] > 0: zone z exports
- Zonal prices are the duals of the zonal balances written as
  supply - NP = demand - RES, i.e. the cost of one more MWh of demand
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

from . import lp_core
from .config import ScenarioConfig, Setup, max_workers
from .errors import GridDataError, SolverError
from .grid_model import ZoneKind, derive_virtual_zones
from .sensitivity import build_gsk, zonal_ptdf

logger = logging.getLogger(__name__)

RES_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class MarketSolution:
    """Zonal market result; arrays are indexed [hour position, entity]."""

    stage: str  # "d2", "d1_shc" or "d1_ahc"
    hours: tuple
    zone_ids: tuple  # physical zones (FB then non-FB)
    fb_zone_ids: tuple
    vbz_ids: tuple
    generation: np.ndarray  # hours x plants
    curtailment: np.ndarray  # hours x nodes
    exchange: np.ndarray  # hours x borders
    net_position: np.ndarray  # hours x FB zones
    vbz_position: np.ndarray  # hours x virtual zones
    prices: np.ndarray  # hours x physical zones
    generation_cost: np.ndarray  # hours x physical zones
    curtailment_cost: np.ndarray  # hours x physical zones
    balance_slack: np.ndarray  # hours x physical zones
    objective: np.ndarray  # hours
    injection: np.ndarray  # hours x nodes
    res: np.ndarray  # RES availability the market cleared against

    @property
    def setup(self):
        if self.stage == "d2":
            return None
        return Setup(self.stage.split("_", 1)[1])

    @property
    def total_cost(self):
        return self.generation_cost + self.curtailment_cost

    def row(self, hour):
        return self.hours.index(hour)


class D2Solution(MarketSolution):
    pass


class D1Solution(MarketSolution):
    pass


@dataclass(frozen=True, eq=False)
class D0Solution:
    setup: Setup
    hours: tuple
    lc_ids: tuple
    rd_pos: np.ndarray  # hours x plants
    rd_neg: np.ndarray  # hours x plants
    curtailment: np.ndarray  # hours x nodes
    injection: np.ndarray  # hours x nodes
    flows: np.ndarray  # hours x L^c entries
    objective: np.ndarray  # hours, penalty objective

    def row(self, hour):
        return self.hours.index(hour)


@dataclass(frozen=True, eq=False)
class CostReport:
    setup: Setup
    by_zone: pd.DataFrame
    hourly: pd.DataFrame

    def _sum(self, column, kind=None):
        df = self.by_zone if kind is None else self.by_zone[self.by_zone["kind"] == kind]
        return float(df[column].sum())

    @property
    def fb_cost(self):
        """Generation plus congestion-management cost of the FB region."""
        return self._sum("total_cost", ZoneKind.FB.value)

    @property
    def non_fb_cost(self):
        return self._sum("total_cost", ZoneKind.NON_FB.value)

    @property
    def total_cost(self):
        return self._sum("total_cost")

    @property
    def cm_cost(self):
        return self._sum("cm_cost")

    @property
    def generation_cost(self):
        return self._sum("generation_cost")


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------

def _check_hours(grid, hours):
    hours = tuple(int(h) for h in hours)
    if not hours:
        raise GridDataError("no hours requested")
    bad = [h for h in hours if not 1 <= h <= grid.series.horizon]
    if bad:
        raise GridDataError(f"hours outside the 1..{grid.series.horizon} horizon: {bad[:5]}")
    return hours


def _bound_at(value, k):
    """Scalar bound or per-hour sequence aligned with the solved hours."""
    if np.ndim(value) == 0:
        return float(value)
    return float(np.asarray(value)[k])


def _solve_hours(build, hours, stage, lp_dir=None):
    """Build, solve and decode every hour; results come back in hour order."""
    if lp_dir is not None:
        Path(lp_dir).mkdir(parents=True, exist_ok=True)

    def run(item):
        k, hour = item
        model, decode = build(k, hour)
        if lp_dir is not None:
            lp_core.write_lp(model, Path(lp_dir) / f"{stage}_h{hour:04d}.lp")
        solution = lp_core.solve(model)
        if not solution.optimal:
            raise SolverError(solution.message or "no optimum", stage=stage, hour=hour,
                              status=solution.status.value)
        logger.debug("%s hour %d: objective %.2f", stage, hour, solution.objective)
        return decode(solution)

    # populate cached grid lookups before threads share the grid
    build(0, hours[0])
    workers = min(max_workers(), len(hours))
    if workers <= 1:
        return [run(item) for item in enumerate(hours)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run, enumerate(hours)))


def _zone_members(grid):
    """Per physical zone: plant indices and node indices."""
    plants = {z: [] for z in grid.physical_zones}
    nodes = {z: [] for z in grid.physical_zones}
    for j, zone in enumerate(grid.plant_zone):
        plants[zone].append(j)
    for i, node in enumerate(grid.nodes):
        nodes[node.zone].append(i)
    return plants, nodes


def nodal_injection(grid, generation, curtailment, res, demand):
    """Net injection per node: G + RES - CURT - demand."""
    return generation @ grid.node_plant_matrix.T + res - curtailment - demand


# ---------------------------------------------------------------------------
# market models (D-2 / D-1)
# ---------------------------------------------------------------------------

def _market_hour(grid, k, hour, res_row, stage, config, fb=None, ex_bounds=None,
                 vbz_bounds=None):
    """
    One hour of the zonal market LP.

    ``fb`` is (zonal PTDF over the coupled zones, ram_pos row, ram_neg row) or
    None for the D-2 base case.
    """
    t = hour - 1
    ahc = stage == "d1_ahc"
    series = grid.series
    demand_row = series.demand[t]
    c_var = series.c_var[t]
    ntc = series.ntc[t]
    plants_of, nodes_of = _zone_members(grid)
    model = lp_core.LpModel(name=f"{stage}_h{hour}")

    g = [model.add_variable(f"G[{p.id}]", 0.0, p.g_max, c_var[j]) for j, p in enumerate(grid.plants)]
    curt = {}
    for i, node_id in enumerate(grid.node_ids):
        if res_row[i] > RES_TOL:
            curt[i] = model.add_variable(f"CURT[{node_id}]", 0.0, res_row[i],
                                         config.penalties.curtailment_market)

    ex = []
    for b, border in enumerate(grid.borders):
        lo, hi = -ntc[b], ntc[b]
        if ex_bounds and border.id in ex_bounds:
            pin_lo, pin_hi = ex_bounds[border.id]
            lo, hi = max(lo, _bound_at(pin_lo, k)), min(hi, _bound_at(pin_hi, k))
        ex.append(model.add_variable(f"EX[{border.id}]", lo, hi))

    np_fb = [model.add_variable(f"NP[{z}]", -np.inf, np.inf) for z in grid.fb_zones]
    np_vbz = []
    if ahc:
        for z in grid.virtual_zones:
            border_id = grid.zone_by_id[z].attached_border
            lo, hi = -np.inf, np.inf
            if vbz_bounds and border_id in vbz_bounds:
                lo, hi = (_bound_at(v, k) for v in vbz_bounds[border_id])
            np_vbz.append(model.add_variable(f"NP[{z}]", lo, hi))

    slack_cost = config.balance_slack_penalty
    share = grid.border_fb_share
    balance = []
    for z in grid.physical_zones:
        terms = {g[j]: 1.0 for j in plants_of[z]}
        for i in nodes_of[z]:
            if i in curt:
                terms[curt[i]] = -1.0
        kind = grid.zone_by_id[z].kind
        if kind == ZoneKind.FB:
            zi = grid.fb_zones.index(z)
            if not ahc:
                for b in range(len(grid.borders)):
                    if share[b, zi]:
                        terms[ex[b]] = terms.get(ex[b], 0.0) + share[b, zi]
            terms[np_fb[zi]] = -1.0
        else:
            terms[ex[grid.border_index[grid.border_of_zone[z]]]] = -1.0
        if slack_cost is not None:
            terms[model.add_variable(f"SLACK_UP[{z}]", 0.0, np.inf, slack_cost)] = 1.0
            terms[model.add_variable(f"SLACK_DN[{z}]", 0.0, np.inf, slack_cost)] = -1.0
        rhs = float(demand_row[nodes_of[z]].sum() - res_row[nodes_of[z]].sum())
        balance.append(model.add_constraint(f"balance[{z}]", terms, "==", rhs))

    # AHC: physical FB positions sum to -sum(EX) and the VBZ positions (= EX) close it;
    # a sum over physical FB zones alone would pin the border exchanges to zero
    np_sum = {v: 1.0 for v in np_fb + np_vbz}
    model.add_constraint("np_sum", np_sum, "==", 0.0)

    if ahc:
        for v, z in enumerate(grid.virtual_zones):
            b = grid.border_index[grid.zone_by_id[z].attached_border]
            model.add_constraint(f"vbz_np[{z}]", {np_vbz[v]: 1.0, ex[b]: -1.0}, "==", 0.0)

    if fb is not None:
        ptdf_z, ram_pos, ram_neg = fb
        coupled = np_fb + np_vbz
        for c in range(ptdf_z.matrix.shape[0]):
            terms = {coupled[j]: ptdf_z.matrix[c, j] for j in range(len(coupled))}
            name = ptdf_z.row_ids[c]
            model.add_constraint(f"ram_pos[{name}]", terms, "<=", ram_pos[c])
            model.add_constraint(f"ram_neg[{name}]", terms, ">=", ram_neg[c])

    def decode(sol):
        x = sol.x
        curt_row = np.zeros(len(grid.nodes))
        for i, idx in curt.items():
            curt_row[i] = x[idx]
        g_row = x[g]
        slack_row = np.zeros(len(grid.physical_zones))
        if slack_cost is not None:
            for zi, z in enumerate(grid.physical_zones):
                slack_row[zi] = sol.value(f"SLACK_UP[{z}]") - sol.value(f"SLACK_DN[{z}]")
        gen_cost = np.array([float(g_row[plants_of[z]] @ c_var[plants_of[z]])
                             for z in grid.physical_zones])
        curt_cost = np.array([float(curt_row[nodes_of[z]].sum()) * config.penalties.curtailment_market
                              for z in grid.physical_zones])
        return {
            "generation": g_row,
            "curtailment": curt_row,
            "exchange": x[ex] if ex else np.zeros(0),
            "net_position": x[np_fb],
            "vbz_position": x[np_vbz] if np_vbz else np.zeros(0),
            "prices": sol.duals[balance],
            "generation_cost": gen_cost,
            "curtailment_cost": curt_cost,
            "balance_slack": slack_row,
            "objective": sol.objective,
        }

    return model, decode


def _assemble_market(grid, cls, stage, hours, rows, res):
    def stack(key, width):
        return np.array([r[key] for r in rows]).reshape(len(hours), width)

    generation = stack("generation", len(grid.plants))
    curtailment = stack("curtailment", len(grid.nodes))
    t = np.asarray(hours) - 1
    vbz_ids = grid.virtual_zones if stage == "d1_ahc" else ()
    return cls(
        stage=stage,
        hours=tuple(hours),
        zone_ids=grid.physical_zones,
        fb_zone_ids=grid.fb_zones,
        vbz_ids=vbz_ids,
        generation=generation,
        curtailment=curtailment,
        exchange=stack("exchange", len(grid.borders)),
        net_position=stack("net_position", len(grid.fb_zones)),
        vbz_position=stack("vbz_position", len(vbz_ids)),
        prices=stack("prices", len(grid.physical_zones)),
        generation_cost=stack("generation_cost", len(grid.physical_zones)),
        curtailment_cost=stack("curtailment_cost", len(grid.physical_zones)),
        balance_slack=stack("balance_slack", len(grid.physical_zones)),
        objective=np.array([r["objective"] for r in rows]),
        injection=nodal_injection(grid, generation, curtailment, res, grid.series.demand[t]),
        res=res,
    )


def solve_d2(grid, hours, config=None, lp_dir=None):
    """
    D-2 base case: cost-minimal zonal dispatch on the D-2 RES forecast.

    Exchanges over NTC borders are limited to +-NTC, FB zones trade freely
    (no network constraints). Reference flows follow from ``injection``.

    Args:
        grid (GridModel): Grid whose ``res_d2_forecast`` holds the forecast.
        hours (iterable): 1-indexed hours to solve.
        config (ScenarioConfig): Penalties and balance slack switch.
        lp_dir (Path): Write every hourly LP there when given.

    Returns:
        D2Solution
    """
    config = config or ScenarioConfig()
    hours = _check_hours(grid, hours)
    res = np.asarray(grid.series.res_d2_forecast)[np.asarray(hours) - 1]

    def build(k, hour):
        return _market_hour(grid, k, hour, res[k], "d2", config)

    rows = _solve_hours(build, hours, "d2", lp_dir)
    sol = _assemble_market(grid, D2Solution, "d2", hours, rows, res)
    logger.info("D-2 solved for %d hours, total cost %.0f", len(hours), sol.objective.sum())
    return sol


def _check_rams(rams, cnecs, hours):
    for name in ("pos", "neg"):
        arr = getattr(rams, name)
        if arr.shape != (len(hours), len(cnecs)):
            raise ValueError(f"ram_{name} has shape {arr.shape}, expected "
                             f"({len(hours)}, {len(cnecs)})")


def _solve_d1(grid, cnecs, rams, hours, setup, config, ex_bounds, vbz_bounds, lp_dir):
    config = config or ScenarioConfig()
    setup = Setup(setup)
    hours = _check_hours(grid, hours)
    _check_rams(rams, cnecs, hours)
    stage = f"d1_{setup.value}"
    gsk = build_gsk(grid, setup)
    ptdf_z = zonal_ptdf(cnecs.ptdf, cnecs.ids, gsk)
    # uncertainty is removed at D-1: the market clears on the true RES
    res = np.asarray(grid.series.res_available)[np.asarray(hours) - 1]

    def build(k, hour):
        fb = (ptdf_z, rams.pos[k], rams.neg[k])
        return _market_hour(grid, k, hour, res[k], stage, config, fb=fb,
                            ex_bounds=ex_bounds, vbz_bounds=vbz_bounds)

    rows = _solve_hours(build, hours, stage, lp_dir)
    sol = _assemble_market(grid, D1Solution, stage, hours, rows, res)
    logger.info("D-1 %s solved for %d hours with %d CNECs, total cost %.0f",
                setup.value.upper(), len(hours), len(cnecs), sol.objective.sum())
    return sol


def solve_d1_shc(grid, cnecs, rams, hours, config=None, ex_bounds=None, lp_dir=None):
    """
    D-1 market coupling with standard hybrid coupling.

    Args:
        grid (GridModel): Grid.
        cnecs (CnecSet): SHC CNECs.
        rams (RamSet): Final SHC RAMs, rows aligned with ``hours``.
        hours (iterable): Hours to solve.
        config (ScenarioConfig): Penalties and balance slack switch.
        ex_bounds (dict): Optional {border id: (lo, hi)} further restricting
            the exchanges; values may be per-hour sequences.
        lp_dir (Path): LP export directory.

    Returns:
        D1Solution
    """
    return _solve_d1(grid, cnecs, rams, hours, Setup.SHC, config, ex_bounds, None, lp_dir)


def solve_d1_ahc(grid, cnecs, rams, hours, config=None, vbz_bounds=None, lp_dir=None):
    """
    D-1 market coupling with advanced hybrid coupling.

    The NTC exchanges appear as VBZ net positions (NP_vbz = EX) inside the FB
    constraints; the net-position sum covers physical and virtual zones.
    ``vbz_bounds`` ({border id: (lo, hi)}) defaults to ``config.vbz_bounds``.
    """
    config = config or ScenarioConfig()
    grid = derive_virtual_zones(grid)
    if vbz_bounds is None:
        vbz_bounds = config.vbz_bounds
    return _solve_d1(grid, cnecs, rams, hours, Setup.AHC, config, None, vbz_bounds, lp_dir)


# ---------------------------------------------------------------------------
# congestion management (D-0)
# ---------------------------------------------------------------------------

def redispatch_penalties(grid, hour, penalties):
    """
    Per plant penalties of positive and negative redispatch for one hour.

    pos: base + markup * c_var
    neg: base + max_p(markup * c_var) - markup * c_var
    with base = rd_base_fb for FB plants and rd_base_non_fb otherwise.
    """
    c_var = grid.series.c_var[hour - 1] * penalties.rd_markup
    base = np.array([
        penalties.rd_base_fb if grid.zone_by_id[z].kind == ZoneKind.FB else penalties.rd_base_non_fb
        for z in grid.plant_zone
    ])
    top = c_var.max() if c_var.size else 0.0
    return base + c_var, base + top - c_var


def _d0_hour(grid, k, hour, lc, d1, config):
    t = hour - 1
    r = d1.row(hour)
    g1 = d1.generation[r]
    curt1 = d1.curtailment[r]
    res_row = grid.series.res_available[t]
    base_inj = nodal_injection(grid, g1, curt1, res_row, grid.series.demand[t])
    pen_pos, pen_neg = redispatch_penalties(grid, hour, config.penalties)
    model = lp_core.LpModel(name=f"d0_h{hour}")

    rd_pos, rd_neg = {}, {}
    for j, plant in enumerate(grid.plants):
        if not plant.redispatchable:
            continue
        rd_pos[j] = model.add_variable(f"RD_POS[{plant.id}]", 0.0, max(plant.g_max - g1[j], 0.0),
                                       pen_pos[j])
        rd_neg[j] = model.add_variable(f"RD_NEG[{plant.id}]", 0.0, max(g1[j], 0.0), pen_neg[j])

    curt0 = {}
    for i, node_id in enumerate(grid.node_ids):
        remaining = res_row[i] - curt1[i]
        if remaining > RES_TOL:
            curt0[i] = model.add_variable(f"CURT0[{node_id}]", 0.0, remaining,
                                          config.penalties.curtailment_d0)
    inj = [model.add_variable(f"INJ[{n}]", -np.inf, np.inf) for n in grid.node_ids]

    for i, node_id in enumerate(grid.node_ids):
        terms = {inj[i]: 1.0}
        for j in np.flatnonzero(grid.node_plant_matrix[i]):
            if j in rd_pos:
                terms[rd_pos[j]] = -1.0
                terms[rd_neg[j]] = 1.0
        if i in curt0:
            terms[curt0[i]] = 1.0
        model.add_constraint(f"node[{node_id}]", terms, "==", base_inj[i])
    model.add_constraint("inj_sum", {v: 1.0 for v in inj}, "==", 0.0)

    limit = lc.fmax - lc.frm
    ids = lc.ids
    for c in range(len(lc)):
        row = lc.ptdf[c]
        terms = {inj[i]: row[i] for i in np.flatnonzero(row)}
        model.add_constraint(f"fmax_pos[{ids[c]}]", terms, "<=", limit[c])
        model.add_constraint(f"fmax_neg[{ids[c]}]", terms, ">=", -limit[c])

    def decode(sol):
        x = sol.x
        pos = np.zeros(len(grid.plants))
        neg = np.zeros(len(grid.plants))
        for j, idx in rd_pos.items():
            pos[j] = x[idx]
            neg[j] = x[rd_neg[j]]
        curt = np.zeros(len(grid.nodes))
        for i, idx in curt0.items():
            curt[i] = x[idx]
        injection = x[inj]
        return {
            "rd_pos": pos,
            "rd_neg": neg,
            "curtailment": curt,
            "injection": injection,
            "flows": lc.ptdf @ injection,
            "objective": sol.objective,
        }

    return model, decode


def solve_d0(grid, lc, d1, hours=None, config=None, lp_dir=None):
    """
    D-0 congestion management on top of a D-1 market result.

    Args:
        grid (GridModel): Grid.
        lc (CnecSet): Contingency-extended line set L^c.
        d1 (D1Solution): Market result to secure.
        hours (iterable): Defaults to all hours of ``d1``.
        config (ScenarioConfig): Redispatch and curtailment penalties.
        lp_dir (Path): LP export directory.

    Returns:
        D0Solution
    """
    config = config or ScenarioConfig()
    hours = _check_hours(grid, d1.hours if hours is None else hours)
    missing = [h for h in hours if h not in d1.hours]
    if missing:
        raise GridDataError(f"D-1 result lacks hours {missing[:5]}")
    setup = d1.setup or Setup.SHC
    stage = f"d0_{setup.value}"

    def build(k, hour):
        return _d0_hour(grid, k, hour, lc, d1, config)

    rows = _solve_hours(build, hours, stage, lp_dir)

    def stack(key, width):
        return np.array([r[key] for r in rows]).reshape(len(hours), width)

    sol = D0Solution(
        setup=setup,
        hours=hours,
        lc_ids=lc.ids,
        rd_pos=stack("rd_pos", len(grid.plants)),
        rd_neg=stack("rd_neg", len(grid.plants)),
        curtailment=stack("curtailment", len(grid.nodes)),
        injection=stack("injection", len(grid.nodes)),
        flows=stack("flows", len(lc)),
        objective=np.array([r["objective"] for r in rows]),
    )
    logger.info("D-0 %s solved for %d hours: %.0f MWh redispatch, %.0f MWh curtailment",
                setup.value.upper(), len(hours), sol.rd_pos.sum() + sol.rd_neg.sum(),
                sol.curtailment.sum())
    return sol


def d1_line_flows(grid, d1, lc):
    """n-1 flows of the market result before congestion management (hours x L^c)."""
    return d1.injection @ lc.ptdf.T


# ---------------------------------------------------------------------------
# cost accounting
# ---------------------------------------------------------------------------

def account_costs(grid, d1, d0, penalties=None):
    """
    Reported costs of one setup (penalties are not part of them).

    Redispatch: RD_pos * markup * c_var - RD_neg * c_var. Curtailment at D-0
    is remunerated at the zonal D-1 price, floored at zero.

    Returns:
        CostReport
    """
    penalties = penalties or ScenarioConfig().penalties
    t = np.asarray(d0.hours) - 1
    rows = [d1.row(h) for h in d0.hours]
    c_var = grid.series.c_var[t]
    rd_cost = d0.rd_pos * penalties.rd_markup * c_var - d0.rd_neg * c_var

    zone_pos = {z: i for i, z in enumerate(d1.zone_ids)}
    node_zone_idx = np.array([zone_pos[n.zone] for n in grid.nodes], dtype=int)
    price_at_node = np.maximum(d1.prices[rows][:, node_zone_idx], 0.0)
    curt_cost = d0.curtailment * price_at_node

    plant_zone_idx = np.array([zone_pos[z] for z in grid.plant_zone], dtype=int)
    n_zones = len(d1.zone_ids)
    hourly = []
    for k, hour in enumerate(d0.hours):
        rd_z = np.bincount(plant_zone_idx, weights=rd_cost[k], minlength=n_zones)
        curt_z = np.bincount(node_zone_idx, weights=curt_cost[k], minlength=n_zones)
        for zi, zone in enumerate(d1.zone_ids):
            hourly.append({
                "hour": hour,
                "zone": zone,
                "kind": grid.zone_by_id[zone].kind.value,
                "generation_cost": float(d1.generation_cost[rows[k], zi]),
                "redispatch_cost": float(rd_z[zi]),
                "curtailment_cost": float(curt_z[zi]),
            })
    hourly = pd.DataFrame(hourly)
    hourly["cm_cost"] = hourly["redispatch_cost"] + hourly["curtailment_cost"]
    hourly["total_cost"] = hourly["generation_cost"] + hourly["cm_cost"]
    by_zone = (hourly.drop(columns="hour")
               .groupby(["zone", "kind"], sort=False, as_index=False).sum())
    return CostReport(d0.setup, by_zone, hourly)


# ---------------------------------------------------------------------------
# audits
# ---------------------------------------------------------------------------

def _violation(arr):
    arr = np.asarray(arr, dtype=float)
    return float(np.maximum(arr, 0.0).max()) if arr.size else 0.0


def _market_audit(grid, sol):
    t = np.asarray(sol.hours) - 1
    demand = grid.series.demand[t]
    g_max = np.array([p.g_max for p in grid.plants])
    ntc = grid.series.ntc[t]
    ahc = sol.stage == "d1_ahc"

    supply = nodal_injection(grid, sol.generation, sol.curtailment, sol.res, demand)
    zone_inj = supply @ grid.zone_node_matrix(sol.zone_ids).T
    n_fb = len(sol.fb_zone_ids)
    balance = zone_inj.copy() + sol.balance_slack
    if not ahc:
        balance[:, :n_fb] += sol.exchange @ grid.border_fb_share
    balance[:, :n_fb] -= sol.net_position
    nfb_border = [grid.border_index[grid.border_of_zone[z]] for z in sol.zone_ids[n_fb:]]
    balance[:, n_fb:] -= sol.exchange[:, nfb_border]

    report = {
        "generation_bounds": max(_violation(-sol.generation), _violation(sol.generation - g_max)),
        "curtailment_bounds": max(_violation(-sol.curtailment), _violation(sol.curtailment - sol.res)),
        "exchange_bounds": _violation(np.abs(sol.exchange) - ntc),
        "zonal_balance": float(np.abs(balance).max()) if balance.size else 0.0,
        "net_position_sum": float(np.abs(sol.net_position.sum(axis=1)
                                         + sol.vbz_position.sum(axis=1)).max()),
    }
    if ahc:
        borders = [grid.border_index[grid.zone_by_id[z].attached_border] for z in sol.vbz_ids]
        diff = sol.vbz_position - sol.exchange[:, borders]
        report["vbz_identity"] = float(np.abs(diff).max()) if diff.size else 0.0
    return report


def audit_d2(grid, d2):
    """Largest violation per constraint family of the D-2 model."""
    return _market_audit(grid, d2)


def audit_d1(grid, d1, cnecs, rams):
    """Largest violation per constraint family of a D-1 model, FB constraints included."""
    report = _market_audit(grid, d1)
    if d1.setup == Setup.AHC:
        grid = derive_virtual_zones(grid)
        positions = np.hstack([d1.net_position, d1.vbz_position])
    else:
        positions = d1.net_position
    ptdf_z = zonal_ptdf(cnecs.ptdf, cnecs.ids, build_gsk(grid, d1.setup))
    flow = positions @ ptdf_z.matrix.T
    report["fb_constraints"] = max(_violation(flow - rams.pos), _violation(rams.neg - flow))
    return report


def audit_d0(grid, d0, d1, lc):
    """Largest violation per constraint family of the D-0 model."""
    t = np.asarray(d0.hours) - 1
    rows = [d1.row(h) for h in d0.hours]
    g1 = d1.generation[rows]
    curt1 = d1.curtailment[rows]
    res = grid.series.res_available[t]
    g_max = np.array([p.g_max for p in grid.plants])
    expected = nodal_injection(grid, g1 + d0.rd_pos - d0.rd_neg, curt1 + d0.curtailment,
                               res, grid.series.demand[t])
    flows = d0.injection @ lc.ptdf.T
    limit = lc.fmax - lc.frm
    return {
        "rd_pos_bounds": max(_violation(-d0.rd_pos), _violation(d0.rd_pos - (g_max - g1))),
        "rd_neg_bounds": max(_violation(-d0.rd_neg), _violation(d0.rd_neg - g1)),
        "curtailment_bounds": max(_violation(-d0.curtailment),
                                  _violation(d0.curtailment - (res - curt1))),
        "nodal_balance": float(np.abs(d0.injection - expected).max()),
        "injection_sum": float(np.abs(d0.injection.sum(axis=1)).max()),
        "line_limits": _violation(np.abs(flows) - limit),
    }
