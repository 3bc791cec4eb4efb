"""
Grid Model
==========

Physical and market topology of the test system plus all exogenous data.

Input directory layout (one CSV per entity class):
- nodes.csv    id,zone,is_slack
- lines.csv    id,from,to,susceptance,fmax,frm   (frm may be blank)
- zones.csv    id,kind[,attached_border]          kind in {fb, non_fb, virtual}
- borders.csv  id,non_fb_zone,end_node,weight,ntc_mw  (one row per end node)
- plants.csv   id,node,g_max,c_var,redispatchable
- demand.csv, res.csv    hour,node,value  (hours 1-indexed)
- optional: ntc.csv (hour,border,value), c_var.csv (hour,plant,value),
  res_d2.csv (hour,node,value)

Modelling notes:
- Non-FB zones are copper plates. They carry nodes, plants, demand and RES but
  no AC lines; their single border feeds the meshed grid at the border's
  weighted end nodes.
- Virtual bidding zones are not read from disk by default; they are derived
  from the borders with ``derive_virtual_zones``.
"""

import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from functools import cached_property
from pathlib import Path

import numpy as np
import pandas as pd
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .errors import GridDataError

logger = logging.getLogger(__name__)

REQUIRED_FILES = (
    "nodes.csv", "lines.csv", "zones.csv", "borders.csv",
    "plants.csv", "demand.csv", "res.csv",
)
WEIGHT_TOL = 1e-9


class ZoneKind(str, Enum):
    FB = "fb"
    NON_FB = "non_fb"
    VIRTUAL = "virtual"


@dataclass(frozen=True)
class Node:
    id: str
    zone: str
    is_slack: bool = False


@dataclass(frozen=True)
class Line:
    id: str
    from_node: str
    to_node: str
    susceptance: float
    fmax: float
    frm: float


@dataclass(frozen=True)
class Zone:
    id: str
    kind: ZoneKind
    attached_border: str = None


@dataclass(frozen=True)
class Border:
    id: str
    non_fb_zone: str
    end_nodes: tuple  # ((node_id, weight), ...)
    ntc: float


@dataclass(frozen=True)
class Plant:
    id: str
    node: str
    g_max: float
    c_var: float
    redispatchable: bool = True


@dataclass(frozen=True, eq=False)
class ExogenousSeries:
    """
    Hourly data as dense arrays; row ``h - 1`` holds hour ``h``.

    ``demand``/``res_available``/``res_d2_forecast`` are hours x nodes in the
    grid's node order, ``ntc`` is hours x borders, ``c_var`` hours x plants.
    """

    demand: np.ndarray
    res_available: np.ndarray
    res_d2_forecast: np.ndarray
    ntc: np.ndarray
    c_var: np.ndarray

    @property
    def horizon(self):
        return self.demand.shape[0]


@dataclass(frozen=True, eq=False)
class GridModel:
    nodes: tuple
    lines: tuple
    zones: tuple
    borders: tuple
    plants: tuple
    series: ExogenousSeries
    name: str = field(default="grid")

    def __post_init__(self):
        _validate(self)
        for arr in (self.series.demand, self.series.res_available,
                    self.series.res_d2_forecast, self.series.ntc, self.series.c_var):
            arr.setflags(write=False)

    # --- lookups -----------------------------------------------------------
    @cached_property
    def node_ids(self):
        return tuple(n.id for n in self.nodes)

    @cached_property
    def line_ids(self):
        return tuple(l.id for l in self.lines)

    @cached_property
    def plant_ids(self):
        return tuple(p.id for p in self.plants)

    @cached_property
    def border_ids(self):
        return tuple(b.id for b in self.borders)

    @cached_property
    def node_index(self):
        return {n: i for i, n in enumerate(self.node_ids)}

    @cached_property
    def line_index(self):
        return {l: i for i, l in enumerate(self.line_ids)}

    @cached_property
    def plant_index(self):
        return {p: i for i, p in enumerate(self.plant_ids)}

    @cached_property
    def border_index(self):
        return {b: i for i, b in enumerate(self.border_ids)}

    @cached_property
    def zone_by_id(self):
        return {z.id: z for z in self.zones}

    @cached_property
    def node_zone(self):
        return {n.id: n.zone for n in self.nodes}

    @cached_property
    def slack(self):
        return next(n.id for n in self.nodes if n.is_slack)

    def zones_of_kind(self, kind):
        return tuple(z.id for z in self.zones if z.kind == kind)

    @cached_property
    def fb_zones(self):
        return self.zones_of_kind(ZoneKind.FB)

    @cached_property
    def non_fb_zones(self):
        return self.zones_of_kind(ZoneKind.NON_FB)

    @cached_property
    def virtual_zones(self):
        return self.zones_of_kind(ZoneKind.VIRTUAL)

    @cached_property
    def ahc_zones(self):
        """Z^FB_AHC: physical FB zones followed by the virtual ones."""
        return self.fb_zones + self.virtual_zones

    @cached_property
    def physical_zones(self):
        return self.fb_zones + self.non_fb_zones

    @cached_property
    def fb_node_mask(self):
        kinds = {z.id: z.kind for z in self.zones}
        return np.array([kinds[n.zone] == ZoneKind.FB for n in self.nodes])

    # --- mappings ----------------------------------------------------------
    def zone_nodes(self, zone_id):
        """mn(z): all nodes of a zone (border end nodes for a virtual zone)."""
        zone = self.zone_by_id[zone_id]
        if zone.kind == ZoneKind.VIRTUAL:
            border = self.borders[self.border_index[zone.attached_border]]
            return tuple(node for node, _ in border.end_nodes)
        return tuple(n.id for n in self.nodes if n.zone == zone_id)

    def ntc_neighbors(self, fb_zone):
        """mz(z): borders whose end nodes lie in the FB zone."""
        return tuple(
            b.id for b in self.borders
            if any(self.node_zone[node] == fb_zone for node, _ in b.end_nodes)
        )

    @cached_property
    def border_of_zone(self):
        return {b.non_fb_zone: b.id for b in self.borders}

    @cached_property
    def vbz_map(self):
        """mvbz: virtual zone -> tuple of mapped non-FB zones."""
        mapping = {}
        for zone in self.zones:
            if zone.kind == ZoneKind.VIRTUAL:
                border = self.borders[self.border_index[zone.attached_border]]
                mapping[zone.id] = (border.non_fb_zone,)
        return mapping

    def plants_at(self, node_id):
        """mp(n)."""
        return tuple(p.id for p in self.plants if p.node == node_id)

    def redispatch_plants_at(self, node_id):
        """mprd(n)."""
        return tuple(p.id for p in self.plants if p.node == node_id and p.redispatchable)

    @cached_property
    def plant_zone(self):
        return tuple(self.node_zone[p.node] for p in self.plants)

    # --- incidence matrices ---------------------------------------------------
    @cached_property
    def node_plant_matrix(self):
        """nodes x plants incidence (1 where the plant sits on the node)."""
        m = np.zeros((len(self.nodes), len(self.plants)))
        for j, p in enumerate(self.plants):
            m[self.node_index[p.node], j] = 1.0
        return m

    def zone_node_matrix(self, zone_ids):
        """zones x nodes membership for physical zones."""
        m = np.zeros((len(zone_ids), len(self.nodes)))
        for i, z in enumerate(zone_ids):
            for node in self.zone_nodes(z):
                m[i, self.node_index[node]] = 1.0
        return m

    @cached_property
    def border_node_weights(self):
        """borders x nodes end-node weights."""
        m = np.zeros((len(self.borders), len(self.nodes)))
        for i, b in enumerate(self.borders):
            for node, weight in b.end_nodes:
                m[i, self.node_index[node]] += weight
        return m

    @cached_property
    def border_fb_share(self):
        """borders x FB zones: share of a border's exchange landing in each FB zone."""
        return self.border_node_weights @ self.zone_node_matrix(self.fb_zones).T

    @cached_property
    def border_non_fb_zone_index(self):
        return np.array([self.non_fb_zones.index(b.non_fb_zone) for b in self.borders], dtype=int)

    # --- immutable updates ------------------------------------------------------
    def with_forecast(self, res_d2):
        res_d2 = np.array(res_d2, dtype=float)
        return replace(self, series=replace(self.series, res_d2_forecast=res_d2))

    def with_ntc(self, overrides):
        """Copy with constant NTC values for the given border ids."""
        if not overrides:
            return self
        ntc = np.array(self.series.ntc, dtype=float)
        for border_id, value in overrides.items():
            if border_id not in self.border_index:
                raise GridDataError(f"NTC override for unknown border {border_id!r}")
            ntc[:, self.border_index[border_id]] = float(value)
        return replace(self, series=replace(self.series, ntc=ntc))

    def summary(self):
        return {
            "nodes": len(self.nodes),
            "lines": len(self.lines),
            "fb_zones": len(self.fb_zones),
            "non_fb_zones": len(self.non_fb_zones),
            "virtual_zones": len(self.virtual_zones),
            "borders": len(self.borders),
            "plants": len(self.plants),
            "horizon": self.series.horizon,
        }


# ---------------------------------------------------------------------------
# Loading / saving
# ---------------------------------------------------------------------------

def load_grid(path, frm_default=0.05):
    """
    Load and validate a grid directory.

    Args:
        path (str | Path): Directory holding the documented CSV file set.
        frm_default (float): FRM as a share of fmax for lines with a blank frm.

    Returns:
        GridModel: Validated, immutable grid.
    """
    path = Path(path)
    if not path.is_dir():
        raise GridDataError(f"grid directory not found: {path}")

    missing = [f for f in REQUIRED_FILES if not (path / f).exists()]
    if missing:
        raise GridDataError(f"missing file(s) in {path}: {', '.join(missing)}")

    def read(name, optional=False):
        file_path = path / name
        if optional and not file_path.exists():
            return None
        try:
            return pd.read_csv(file_path, dtype={"id": str, "zone": str, "node": str,
                                                 "from": str, "to": str, "end_node": str,
                                                 "non_fb_zone": str, "border": str,
                                                 "plant": str, "attached_border": str})
        except pd.errors.EmptyDataError:
            raise GridDataError(f"{name} is empty")

    grid = grid_from_tables(
        nodes=read("nodes.csv"),
        lines=read("lines.csv"),
        zones=read("zones.csv"),
        borders=read("borders.csv"),
        plants=read("plants.csv"),
        demand=read("demand.csv"),
        res=read("res.csv"),
        ntc=read("ntc.csv", optional=True),
        c_var=read("c_var.csv", optional=True),
        res_d2=read("res_d2.csv", optional=True),
        frm_default=frm_default,
        name=path.name,
    )
    logger.info("Loaded grid %s: %s", path, grid.summary())
    return grid


def grid_from_tables(nodes, lines, zones, borders, plants, demand, res,
                     ntc=None, c_var=None, res_d2=None, frm_default=0.05, name="grid"):
    """Build a GridModel from DataFrames shaped like the CSV files."""
    _require_columns(nodes, ("id", "zone", "is_slack"), "nodes.csv")
    _require_columns(lines, ("id", "from", "to", "susceptance", "fmax"), "lines.csv")
    _require_columns(zones, ("id", "kind"), "zones.csv")
    _require_columns(borders, ("id", "non_fb_zone", "end_node", "weight", "ntc_mw"), "borders.csv")
    _require_columns(plants, ("id", "node", "g_max", "c_var"), "plants.csv")
    _require_columns(demand, ("hour", "node", "value"), "demand.csv")
    _require_columns(res, ("hour", "node", "value"), "res.csv")

    node_objs = tuple(
        Node(str(r.id), str(r.zone), _as_bool(r.is_slack)) for r in nodes.itertuples(index=False)
    )

    line_objs = []
    for r in lines.to_dict("records"):
        fmax = float(r["fmax"])
        frm = r.get("frm")
        frm = frm_default * fmax if frm is None or pd.isna(frm) else float(frm)
        line_objs.append(Line(str(r["id"]), str(r["from"]), str(r["to"]),
                              float(r["susceptance"]), fmax, frm))

    zone_objs = []
    for r in zones.to_dict("records"):
        try:
            kind = ZoneKind(str(r["kind"]))
        except ValueError:
            raise GridDataError(f"zone {r['id']}: unknown kind {r['kind']!r}")
        attached = r.get("attached_border")
        attached = None if attached is None or pd.isna(attached) else str(attached)
        zone_objs.append(Zone(str(r["id"]), kind, attached))

    border_objs = []
    for border_id, rows in borders.groupby("id", sort=False):
        non_fb = rows["non_fb_zone"].unique()
        ntc_values = rows["ntc_mw"].unique()
        if len(non_fb) != 1 or len(ntc_values) != 1:
            raise GridDataError(f"border {border_id}: rows disagree on non_fb_zone/ntc_mw")
        end_nodes = tuple((str(n), float(w)) for n, w in zip(rows["end_node"], rows["weight"]))
        border_objs.append(Border(str(border_id), str(non_fb[0]), end_nodes, float(ntc_values[0])))

    plant_objs = tuple(
        Plant(str(r["id"]), str(r["node"]), float(r["g_max"]), float(r["c_var"]),
              _as_bool(r.get("redispatchable", True)))
        for r in plants.to_dict("records")
    )

    node_ids = [n.id for n in node_objs]
    demand_arr = _pivot_series(demand, node_ids, "demand.csv", "node")
    res_arr = _pivot_series(res, node_ids, "res.csv", "node", horizon=demand_arr.shape[0])
    res_d2_arr = (
        res_arr.copy() if res_d2 is None
        else _pivot_series(res_d2, node_ids, "res_d2.csv", "node", horizon=demand_arr.shape[0])
    )
    horizon = demand_arr.shape[0]

    ntc_arr = np.tile([b.ntc for b in border_objs], (horizon, 1)).astype(float)
    if ntc is not None:
        ntc_arr = _overlay_series(ntc_arr, ntc, [b.id for b in border_objs], "ntc.csv", "border")
    c_var_arr = np.tile([p.c_var for p in plant_objs], (horizon, 1)).astype(float)
    if c_var is not None:
        c_var_arr = _overlay_series(c_var_arr, c_var, [p.id for p in plant_objs], "c_var.csv", "plant")

    series = ExogenousSeries(demand_arr, res_arr, res_d2_arr,
                             ntc_arr.reshape(horizon, len(border_objs)),
                             c_var_arr.reshape(horizon, len(plant_objs)))
    return GridModel(node_objs, tuple(line_objs), tuple(zone_objs), tuple(border_objs),
                     plant_objs, series, name=name)


def save_grid(grid, path):
    """Write the grid in the documented file set (inverse of ``load_grid``)."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    hours = np.arange(1, grid.series.horizon + 1)

    pd.DataFrame(
        [(n.id, n.zone, int(n.is_slack)) for n in grid.nodes], columns=["id", "zone", "is_slack"]
    ).to_csv(path / "nodes.csv", index=False)
    pd.DataFrame(
        [(l.id, l.from_node, l.to_node, l.susceptance, l.fmax, l.frm) for l in grid.lines],
        columns=["id", "from", "to", "susceptance", "fmax", "frm"],
    ).to_csv(path / "lines.csv", index=False)
    pd.DataFrame(
        [(z.id, z.kind.value, z.attached_border or "") for z in grid.zones],
        columns=["id", "kind", "attached_border"],
    ).to_csv(path / "zones.csv", index=False)
    pd.DataFrame(
        [(b.id, b.non_fb_zone, node, w, b.ntc) for b in grid.borders for node, w in b.end_nodes],
        columns=["id", "non_fb_zone", "end_node", "weight", "ntc_mw"],
    ).to_csv(path / "borders.csv", index=False)
    pd.DataFrame(
        [(p.id, p.node, p.g_max, p.c_var, int(p.redispatchable)) for p in grid.plants],
        columns=["id", "node", "g_max", "c_var", "redispatchable"],
    ).to_csv(path / "plants.csv", index=False)

    _long_series(grid.series.demand, hours, grid.node_ids, "node").to_csv(path / "demand.csv", index=False)
    _long_series(grid.series.res_available, hours, grid.node_ids, "node").to_csv(path / "res.csv", index=False)
    if not np.array_equal(grid.series.res_d2_forecast, grid.series.res_available):
        _long_series(grid.series.res_d2_forecast, hours, grid.node_ids, "node").to_csv(
            path / "res_d2.csv", index=False)
    if not np.array_equal(grid.series.ntc, np.tile([b.ntc for b in grid.borders], (len(hours), 1))):
        _long_series(grid.series.ntc, hours, grid.border_ids, "border").to_csv(path / "ntc.csv", index=False)
    if not np.array_equal(grid.series.c_var, np.tile([p.c_var for p in grid.plants], (len(hours), 1))):
        _long_series(grid.series.c_var, hours, grid.plant_ids, "plant").to_csv(path / "c_var.csv", index=False)


def derive_virtual_zones(grid):
    """
    Add one virtual bidding zone per border (advanced hybrid coupling).

    The VBZ sits on the border's FB-side end nodes. Borders that already own a
    virtual zone are left alone, so the call is idempotent.

    Args:
        grid (GridModel): Grid with physical zones and borders.

    Returns:
        GridModel: Grid whose zone set includes the virtual zones.
    """
    if not grid.borders:
        return grid
    attached = {z.attached_border for z in grid.zones if z.kind == ZoneKind.VIRTUAL}
    new_zones = []
    for border in grid.borders:
        if not border.end_nodes:
            raise GridDataError(f"border {border.id} has no end nodes")
        if border.id in attached:
            continue
        new_zones.append(Zone(f"VBZ_{border.id}", ZoneKind.VIRTUAL, border.id))
    if not new_zones:
        return grid
    logger.info("Derived %d virtual bidding zones", len(new_zones))
    return replace(grid, zones=grid.zones + tuple(new_zones))


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------

def _validate(grid):
    zone_ids = [z.id for z in grid.zones]
    _unique(zone_ids, "zone")
    _unique([n.id for n in grid.nodes], "node")
    _unique([l.id for l in grid.lines], "line")
    _unique([p.id for p in grid.plants], "plant")
    _unique([b.id for b in grid.borders], "border")

    zones = {z.id: z for z in grid.zones}
    nodes = {n.id: n for n in grid.nodes}
    border_ids = {b.id for b in grid.borders}

    slacks = [n.id for n in grid.nodes if n.is_slack]
    if len(slacks) == 0:
        raise GridDataError("no slack node")
    if len(slacks) > 1:
        raise GridDataError(f"multiple slack nodes: {', '.join(slacks)}")

    for n in grid.nodes:
        if n.zone not in zones:
            raise GridDataError(f"node {n.id}: unknown zone {n.zone!r}")
        if zones[n.zone].kind == ZoneKind.VIRTUAL:
            raise GridDataError(f"node {n.id}: virtual zone {n.zone} cannot own nodes")
    if zones[nodes[slacks[0]].zone].kind != ZoneKind.FB:
        raise GridDataError(f"slack node {slacks[0]} must lie in a flow-based zone")

    for z in grid.zones:
        if z.kind == ZoneKind.VIRTUAL:
            if z.attached_border not in border_ids:
                raise GridDataError(f"virtual zone {z.id}: needs exactly one attached border")
        elif z.attached_border:
            raise GridDataError(f"zone {z.id}: only virtual zones attach to a border")

    for l in grid.lines:
        for end in (l.from_node, l.to_node):
            if end not in nodes:
                raise GridDataError(f"line {l.id}: unknown node {end!r}")
            if zones[nodes[end].zone].kind != ZoneKind.FB:
                raise GridDataError(f"line {l.id}: node {end} is outside the flow-based area")
        if l.from_node == l.to_node:
            raise GridDataError(f"line {l.id}: from and to are the same node")
        if not l.fmax > 0:
            raise GridDataError(f"line {l.id}: fmax must be > 0")
        if not 0 <= l.frm < l.fmax:
            raise GridDataError(f"line {l.id}: need 0 <= frm < fmax")
        if not l.susceptance > 0:
            raise GridDataError(f"line {l.id}: susceptance must be > 0")

    for p in grid.plants:
        if p.node not in nodes:
            raise GridDataError(f"plant {p.id}: unknown node {p.node!r}")
        if not p.g_max > 0:
            raise GridDataError(f"plant {p.id}: g_max must be > 0")
        if p.c_var < 0:
            raise GridDataError(f"plant {p.id}: c_var must be >= 0")

    borders_per_zone = {}
    for b in grid.borders:
        if b.non_fb_zone not in zones or zones[b.non_fb_zone].kind != ZoneKind.NON_FB:
            raise GridDataError(f"border {b.id}: {b.non_fb_zone!r} is not a non-FB zone")
        if not b.end_nodes:
            raise GridDataError(f"border {b.id} has no end nodes")
        for node, weight in b.end_nodes:
            if node not in nodes or zones[nodes[node].zone].kind != ZoneKind.FB:
                raise GridDataError(f"border {b.id}: end node {node!r} is not in a flow-based zone")
            if weight < 0:
                raise GridDataError(f"border {b.id}: negative weight on {node}")
        if abs(sum(w for _, w in b.end_nodes) - 1.0) > WEIGHT_TOL:
            raise GridDataError(f"border {b.id}: end-node weights must sum to 1")
        if b.ntc < 0:
            raise GridDataError(f"border {b.id}: ntc must be >= 0")
        borders_per_zone.setdefault(b.non_fb_zone, []).append(b.id)

    for z in grid.zones:
        if z.kind == ZoneKind.NON_FB and len(borders_per_zone.get(z.id, [])) != 1:
            raise GridDataError(f"non-FB zone {z.id} must be coupled through exactly one border")

    s = grid.series
    n_nodes = len(grid.nodes)
    for label, arr in (("demand", s.demand), ("res", s.res_available), ("res_d2", s.res_d2_forecast)):
        if arr.ndim != 2 or arr.shape[1] != n_nodes:
            raise GridDataError(f"{label} series does not match the node set")
        if arr.shape[0] != s.horizon:
            raise GridDataError(f"{label} series horizon differs from demand")
        if (arr < 0).any():
            hour, col = np.argwhere(arr < 0)[0]
            raise GridDataError(f"{label} negative at hour {hour + 1}, node {grid.nodes[col].id}")
    if s.ntc.shape != (s.horizon, len(grid.borders)) or (s.ntc < 0).any():
        raise GridDataError("ntc series must be hours x borders and >= 0")
    if s.c_var.shape != (s.horizon, len(grid.plants)) or (s.c_var < 0).any():
        raise GridDataError("c_var series must be hours x plants and >= 0")

    fb_nodes = [n.id for n in grid.nodes if zones[n.zone].kind == ZoneKind.FB]
    if len(fb_nodes) > 1:
        index = {n: i for i, n in enumerate(fb_nodes)}
        rows = [index[l.from_node] for l in grid.lines]
        cols = [index[l.to_node] for l in grid.lines]
        adjacency = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(len(fb_nodes),) * 2)
        n_comp, _ = connected_components(adjacency, directed=False)
        if n_comp != 1:
            raise GridDataError(f"flow-based grid is split into {n_comp} islands")


def _unique(ids, what):
    seen = set()
    for i in ids:
        if i in seen:
            raise GridDataError(f"duplicate {what} id {i!r}")
        seen.add(i)


def _require_columns(df, columns, fname):
    missing = [c for c in columns if c not in df.columns]
    if missing:
        raise GridDataError(f"{fname}: missing column(s) {', '.join(missing)}")


def _as_bool(value):
    if isinstance(value, str):
        return value.strip().lower() in ("1", "true", "yes", "y")
    if value is None or (isinstance(value, float) and np.isnan(value)):
        return False
    return bool(value)


def _pivot_series(df, ids, fname, key, horizon=None):
    unknown = sorted(set(df[key].astype(str)) - set(ids))
    if unknown:
        raise GridDataError(f"{fname}: unknown {key}(s) {', '.join(unknown[:5])}")
    hours = df["hour"].astype(int)
    if len(df) and hours.min() < 1:
        raise GridDataError(f"{fname}: hours are 1-indexed")
    n_hours = int(hours.max()) if len(df) else 0
    if horizon is not None and n_hours != horizon:
        raise GridDataError(f"{fname}: horizon {n_hours} differs from demand horizon {horizon}")
    table = df.assign(**{key: df[key].astype(str), "hour": hours}).pivot_table(
        index="hour", columns=key, values="value", aggfunc="sum")
    table = table.reindex(index=range(1, n_hours + 1), columns=list(ids)).fillna(0.0)
    return table.to_numpy(dtype=float)


def _overlay_series(base, df, ids, fname, key):
    out = base.copy()
    index = {i: k for k, i in enumerate(ids)}
    for r in df.itertuples(index=False):
        ident = str(getattr(r, key))
        if ident not in index:
            raise GridDataError(f"{fname}: unknown {key} {ident!r}")
        hour = int(r.hour)
        if not 1 <= hour <= base.shape[0]:
            raise GridDataError(f"{fname}: hour {hour} outside horizon")
        out[hour - 1, index[ident]] = float(r.value)
    return out


def _long_series(arr, hours, ids, key):
    frame = pd.DataFrame(arr, index=pd.Index(hours, name="hour"), columns=list(ids))
    return frame.reset_index().melt(id_vars="hour", var_name=key, value_name="value")
