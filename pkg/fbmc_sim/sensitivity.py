"""
Sensitivities
=============

DC load-flow sensitivities of the grid and the critical-network-element
selection built on them:

1. Nodal PTDF from the reduced susceptance matrix (slack column is zero)
2. LODF for single line outages; outages that split the grid are flagged
3. Flat GSK (SHC) and VBZ-extended GSK (AHC)
4. Zonal PTDF = nodal PTDF x GSK
5. CNE selection by the maximum zone-to-zone PTDF over n-0 and outage rows,
   then CNEC expansion with the k worst outages by |LODF|

Methodology:
- PTDF = B_d K [0 ; B_bus,r^-1], K the line-node incidence (+1 from, -1 to)
- LODF(m, c) = (PTDF[m, from_c] - PTDF[m, to_c]) / (1 - (PTDF[c, from_c] - PTDF[c, to_c]))
- Contingency row (l, c) = PTDF[l] + LODF(l, c) * PTDF[c]
- Nodes of non-FB zones get the PTDF column of their border (weighted end nodes)
"""

import logging
from dataclasses import dataclass
from itertools import combinations
from pathlib import Path

import numpy as np
import pandas as pd
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .config import Setup
from .errors import GridDataError, SensitivityError
from .grid_model import ZoneKind

logger = logging.getLogger(__name__)

SPLIT_TOL = 1e-9
COND_LIMIT = 1e12


@dataclass(frozen=True, eq=False)
class NodalPtdf:
    matrix: np.ndarray  # lines x nodes
    line_ids: tuple
    node_ids: tuple
    slack: str

    def row(self, line_id):
        return self.matrix[self.line_ids.index(line_id)]


@dataclass(frozen=True, eq=False)
class LodfTable:
    matrix: np.ndarray  # monitored x outaged, NaN columns for splitting outages
    line_ids: tuple
    splits: np.ndarray  # bool per outaged line

    @property
    def bridges(self):
        return tuple(l for l, s in zip(self.line_ids, self.splits) if s)


@dataclass(frozen=True, eq=False)
class Gsk:
    matrix: np.ndarray  # nodes x zones
    node_ids: tuple
    zone_ids: tuple
    variant: Setup


@dataclass(frozen=True, eq=False)
class ZonalPtdf:
    matrix: np.ndarray  # rows x zones
    row_ids: tuple
    zone_ids: tuple


@dataclass(frozen=True, eq=False)
class CnecSet:
    """Monitored lines with their contingencies and effective PTDF rows."""

    monitored: tuple
    contingency: tuple  # None for the n-0 entry
    ptdf: np.ndarray  # entries x nodes
    fmax: np.ndarray
    frm: np.ndarray

    @property
    def ids(self):
        return tuple(cnec_id(m, c) for m, c in zip(self.monitored, self.contingency))

    @property
    def cne_ids(self):
        return tuple(dict.fromkeys(self.monitored))

    @property
    def n0_mask(self):
        return np.array([c is None for c in self.contingency])

    def __len__(self):
        return len(self.monitored)

    def frame(self):
        return pd.DataFrame({
            "cnec": self.ids,
            "monitored": self.monitored,
            "contingency": [c or "" for c in self.contingency],
            "fmax": self.fmax,
            "frm": self.frm,
        })


@dataclass(frozen=True, eq=False)
class SensitivitySet:
    ptdf: NodalPtdf
    lodf: LodfTable
    gsk: dict  # Setup -> Gsk
    cnecs: dict  # Setup -> CnecSet
    lc: CnecSet  # congestion-management set L^c


def cnec_id(monitored, contingency):
    return monitored if contingency is None else f"{monitored}__{contingency}"


# ---------------------------------------------------------------------------
# PTDF / LODF
# ---------------------------------------------------------------------------

def _fb_system(grid):
    fb_nodes = [n.id for n in grid.nodes if grid.zone_by_id[n.zone].kind == ZoneKind.FB]
    index = {n: i for i, n in enumerate(fb_nodes)}
    incidence = np.zeros((len(grid.lines), len(fb_nodes)))
    for k, line in enumerate(grid.lines):
        incidence[k, index[line.from_node]] = 1.0
        incidence[k, index[line.to_node]] = -1.0
    b = np.array([l.susceptance for l in grid.lines])
    return fb_nodes, index, incidence, b


def _check_connected(grid, fb_nodes, index):
    if len(fb_nodes) < 2:
        return
    rows = [index[l.from_node] for l in grid.lines]
    cols = [index[l.to_node] for l in grid.lines]
    adjacency = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(len(fb_nodes),) * 2)
    n_comp, _ = connected_components(adjacency, directed=False)
    if n_comp != 1:
        raise SensitivityError(f"network is disconnected ({n_comp} islands)")


def nodal_ptdf(grid):
    """
    Nodal PTDF for unit injections against the slack node.

    Args:
        grid (GridModel): Validated grid.

    Returns:
        NodalPtdf: lines x nodes matrix in the grid's line and node order.
    """
    fb_nodes, index, incidence, b = _fb_system(grid)
    _check_connected(grid, fb_nodes, index)
    slack = index[grid.slack]
    keep = [i for i in range(len(fb_nodes)) if i != slack]

    b_bus = incidence.T @ (b[:, None] * incidence)
    reduced = b_bus[np.ix_(keep, keep)]
    if reduced.size and np.linalg.cond(reduced) > COND_LIMIT:
        raise SensitivityError("reduced susceptance matrix is singular")
    try:
        inverse = np.linalg.solve(reduced, np.eye(len(keep))) if keep else np.zeros((0, 0))
    except np.linalg.LinAlgError as e:
        raise SensitivityError(f"reduced susceptance matrix is singular: {e}")

    theta = np.zeros((len(fb_nodes), len(fb_nodes)))
    theta[np.ix_(keep, keep)] = inverse
    ptdf_fb = (b[:, None] * incidence) @ theta

    matrix = np.zeros((len(grid.lines), len(grid.nodes)))
    for node_id, i in index.items():
        matrix[:, grid.node_index[node_id]] = ptdf_fb[:, i]
    # copper-plate non-FB nodes inject at their border's end nodes
    border_cols = matrix @ grid.border_node_weights.T
    for node in grid.nodes:
        if grid.zone_by_id[node.zone].kind == ZoneKind.NON_FB:
            border = grid.border_index[grid.border_of_zone[node.zone]]
            matrix[:, grid.node_index[node.id]] = border_cols[:, border]

    matrix[np.abs(matrix) < 1e-14] = 0.0
    return NodalPtdf(matrix, grid.line_ids, grid.node_ids, grid.slack)


def dc_power_flow(grid, injection):
    """
    Line flows for a nodal injection vector by a direct angle solve.

    Independent of ``nodal_ptdf``; the slack node absorbs the imbalance.

    Args:
        grid (GridModel): Validated grid.
        injection (np.ndarray): Net injection per node (grid node order).

    Returns:
        np.ndarray: Flow per line.
    """
    injection = np.asarray(injection, dtype=float)
    fb_nodes, index, incidence, b = _fb_system(grid)
    p = np.zeros(len(fb_nodes))
    for node in grid.nodes:
        value = injection[grid.node_index[node.id]]
        if node.id in index:
            p[index[node.id]] += value
        else:
            border = grid.borders[grid.border_index[grid.border_of_zone[node.zone]]]
            for end, weight in border.end_nodes:
                p[index[end]] += weight * value
    slack = index[grid.slack]
    keep = [i for i in range(len(fb_nodes)) if i != slack]
    b_bus = incidence.T @ (b[:, None] * incidence)
    theta = np.zeros(len(fb_nodes))
    theta[keep] = np.linalg.solve(b_bus[np.ix_(keep, keep)], p[keep])
    return b * (incidence @ theta)


def lodf(grid, ptdf):
    """
    Line outage distribution factors for all single line outages.

    Args:
        grid (GridModel): Grid the PTDF was computed for.
        ptdf (NodalPtdf): Nodal PTDF.

    Returns:
        LodfTable: monitored x outaged; columns of splitting outages are NaN
        and flagged in ``splits``.
    """
    from_idx = [grid.node_index[l.from_node] for l in grid.lines]
    to_idx = [grid.node_index[l.to_node] for l in grid.lines]
    transfer = ptdf.matrix[:, from_idx] - ptdf.matrix[:, to_idx]
    denominator = 1.0 - np.diag(transfer)
    splits = np.abs(denominator) < SPLIT_TOL

    with np.errstate(divide="ignore", invalid="ignore"):
        matrix = transfer / np.where(splits, 1.0, denominator)[None, :]
    np.fill_diagonal(matrix, -1.0)
    matrix[:, splits] = np.nan
    if splits.any():
        logger.warning("%d line outage(s) split the network: %s", int(splits.sum()),
                       ", ".join(l for l, s in zip(grid.line_ids, splits) if s))
    return LodfTable(matrix, grid.line_ids, splits)


# ---------------------------------------------------------------------------
# GSK / zonal PTDF
# ---------------------------------------------------------------------------

def build_gsk(grid, variant):
    """
    Flat GSK over conventional-plant nodes; AHC adds one column per VBZ.

    Args:
        grid (GridModel): Grid (with derived virtual zones for AHC).
        variant (Setup): SHC or AHC.

    Returns:
        Gsk: nodes x zones weight matrix.
    """
    variant = Setup(variant)
    zone_ids = grid.fb_zones if variant == Setup.SHC else grid.ahc_zones
    matrix = np.zeros((len(grid.nodes), len(zone_ids)))
    for j, zone_id in enumerate(zone_ids):
        zone = grid.zone_by_id[zone_id]
        if zone.kind == ZoneKind.VIRTUAL:
            border = grid.borders[grid.border_index[zone.attached_border]]
            for node, weight in border.end_nodes:
                matrix[grid.node_index[node], j] += weight
            continue
        plant_nodes = sorted({grid.node_index[p.node] for p in grid.plants
                              if grid.node_zone[p.node] == zone_id})
        if not plant_nodes:
            raise GridDataError(f"zone {zone_id} has no conventional plant node for the GSK")
        matrix[plant_nodes, j] = 1.0 / len(plant_nodes)
    return Gsk(matrix, grid.node_ids, tuple(zone_ids), variant)


def zonal_ptdf(rows, row_ids, gsk):
    """Zonal PTDF for any set of nodal PTDF rows."""
    return ZonalPtdf(np.asarray(rows) @ gsk.matrix, tuple(row_ids), gsk.zone_ids)


def border_ptdf(rows, grid):
    """P^{N,nFB}: sensitivity of each row to each border's exchange."""
    return np.asarray(rows) @ grid.border_node_weights.T


# ---------------------------------------------------------------------------
# CNE / CNEC selection
# ---------------------------------------------------------------------------

def zone_pairs(zone_ids):
    return list(combinations(zone_ids, 2))


def zone_spread(ptdf_z):
    """Max over zone pairs (X, Y) of |PTDF_X - PTDF_Y| per row."""
    pairs = list(combinations(range(len(ptdf_z.zone_ids)), 2))
    if not pairs:
        return np.zeros(len(ptdf_z.row_ids))
    i, j = np.array(pairs).T
    return np.abs(ptdf_z.matrix[:, i] - ptdf_z.matrix[:, j]).max(axis=1)


def select_cnes(ptdf_z, threshold, lodf_table=None, k=0):
    """
    Lines whose zone-to-zone spread reaches the threshold.

    With ``lodf_table`` and ``k`` the rows of each line under its k worst
    outages count too, so a line critical only after an outage is selected.
    Order follows ``ptdf_z.row_ids``.
    """
    if not 0 < threshold < 1:
        raise ValueError(f"threshold {threshold} outside (0, 1)")
    spread = zone_spread(ptdf_z)
    if lodf_table is not None and k > 0:
        spread = np.maximum(spread, outage_spread(ptdf_z, lodf_table, k))
    return tuple(r for r, s in zip(ptdf_z.row_ids, spread) if s >= threshold)


def outage_spread(ptdf_z, lodf_table, k):
    """Per line: max zone-to-zone spread over its rows under the k worst outages."""
    index = {l: i for i, l in enumerate(ptdf_z.row_ids)}
    spread = np.zeros(len(ptdf_z.row_ids))
    for m, line_id in enumerate(ptdf_z.row_ids):
        outaged = _outage_candidates(lodf_table, line_id)[:k]
        if not outaged:
            continue
        l = lodf_table.line_ids.index(line_id)
        rows = np.array([
            ptdf_z.matrix[m] + lodf_table.matrix[l, lodf_table.line_ids.index(c)] * ptdf_z.matrix[index[c]]
            for c in outaged
        ])
        spread[m] = zone_spread(ZonalPtdf(rows, tuple(outaged), ptdf_z.zone_ids)).max()
    return spread


def _outage_candidates(lodf_table, line_id):
    m = lodf_table.line_ids.index(line_id)
    candidates = [
        (-abs(lodf_table.matrix[m, c]), outaged)
        for c, outaged in enumerate(lodf_table.line_ids)
        if outaged != line_id and not lodf_table.splits[c]
    ]
    candidates.sort()
    return [outaged for _, outaged in candidates]


def worst_contingencies(lodf_table, line_id, k):
    """The k outages with the largest |LODF| on a line; ties by line id."""
    outaged = _outage_candidates(lodf_table, line_id)
    if len(outaged) < k:
        logger.warning("CNE %s has only %d of %d non-splitting outage candidates",
                       line_id, len(outaged), k)
    return outaged[:k]


def contingency_set(ptdf, lodf_table, grid, line_ids, k):
    """
    Expand monitored lines into CNECs: n-0 plus the k worst outages each.

    Args:
        ptdf (NodalPtdf): Nodal PTDF.
        lodf_table (LodfTable): LODFs of the same grid.
        grid (GridModel): For fmax/frm of the monitored lines.
        line_ids (iterable): Monitored lines.
        k (int): Contingencies per line.

    Returns:
        CnecSet
    """
    monitored, contingency, rows = [], [], []
    for line_id in line_ids:
        m = ptdf.line_ids.index(line_id)
        monitored.append(line_id)
        contingency.append(None)
        rows.append(ptdf.matrix[m])
        for outaged in worst_contingencies(lodf_table, line_id, k):
            c = ptdf.line_ids.index(outaged)
            monitored.append(line_id)
            contingency.append(outaged)
            rows.append(ptdf.matrix[m] + lodf_table.matrix[m, c] * ptdf.matrix[c])

    lines = [grid.lines[grid.line_index[l]] for l in monitored]
    matrix = np.array(rows) if rows else np.zeros((0, len(ptdf.node_ids)))
    return CnecSet(tuple(monitored), tuple(contingency), matrix,
                   np.array([l.fmax for l in lines]), np.array([l.frm for l in lines]))


def select_cnecs(ptdf_z, threshold, contingencies_per_cne, ptdf, lodf_table, grid):
    """
    CNE selection by zone-to-zone PTDF spread followed by CNEC expansion.

    A line is selected when its n-0 row or its row under one of its
    ``contingencies_per_cne`` worst outages reaches the threshold.

    Args:
        ptdf_z (ZonalPtdf): n-0 zonal PTDF over all lines (SHC or AHC zones).
        threshold (float): Minimum spread, e.g. 0.05.
        contingencies_per_cne (int): Worst outages added per CNE.
        ptdf (NodalPtdf): Nodal PTDF the zonal one was built from.
        lodf_table (LodfTable): LODFs.
        grid (GridModel): Grid for line limits.

    Returns:
        CnecSet
    """
    cnes = select_cnes(ptdf_z, threshold, lodf_table, contingencies_per_cne)
    logger.info("Selected %d CNEs over %d zone pairs", len(cnes), len(zone_pairs(ptdf_z.zone_ids)))
    return contingency_set(ptdf, lodf_table, grid, cnes, contingencies_per_cne)


def build_sensitivities(grid, config):
    """All sensitivities of a study: PTDF, LODF, both GSKs, both CNEC sets, L^c."""
    ptdf = nodal_ptdf(grid)
    lodf_table = lodf(grid, ptdf)
    gsk, cnecs = {}, {}
    for setup in Setup:
        gsk[setup] = build_gsk(grid, setup)
        ptdf_z = zonal_ptdf(ptdf.matrix, ptdf.line_ids, gsk[setup])
        cnecs[setup] = select_cnecs(ptdf_z, config.threshold, config.contingencies_mc,
                                    ptdf, lodf_table, grid)
    lc = contingency_set(ptdf, lodf_table, grid, grid.line_ids, config.contingencies_cm)
    print(f"Sensitivities: {len(grid.lines)} lines, {len(lodf_table.bridges)} bridges, "
          f"CNEs SHC {len(cnecs[Setup.SHC].cne_ids)} / AHC {len(cnecs[Setup.AHC].cne_ids)}, "
          f"CNECs SHC {len(cnecs[Setup.SHC])} / AHC {len(cnecs[Setup.AHC])}, |L^c| {len(lc)}")
    return SensitivitySet(ptdf, lodf_table, gsk, cnecs, lc)


def dump_sensitivities(sens, directory):
    """Debug CSVs of PTDF, LODF, GSKs and CNEC lists."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    pd.DataFrame(sens.ptdf.matrix, index=sens.ptdf.line_ids,
                 columns=sens.ptdf.node_ids).to_csv(directory / "ptdf.csv")
    pd.DataFrame(sens.lodf.matrix, index=sens.lodf.line_ids,
                 columns=sens.lodf.line_ids).to_csv(directory / "lodf.csv")
    for setup, gsk in sens.gsk.items():
        pd.DataFrame(gsk.matrix, index=gsk.node_ids,
                     columns=gsk.zone_ids).to_csv(directory / f"gsk_{setup.value}.csv")
        sens.cnecs[setup].frame().to_csv(directory / f"cnecs_{setup.value}.csv", index=False)
    sens.lc.frame().to_csv(directory / "cnecs_cm.csv", index=False)
