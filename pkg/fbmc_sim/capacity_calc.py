"""
Capacity Calculation
====================

Turns the D-2 base case into flow-based parameters per CNEC and hour:

1. Reference flows of the D-2 dispatch on every CNEC
2. Zero-balance flows: f0_fb (no trade between FB zones) and f0_all (no trade
   at all); their difference is the unscheduled allocated flow fuaf
3. RAMs for SHC (from f0_fb) and AHC (from f0_all)
4. Adjustment for minimum RAM (AMR) and the core floor

Methodology:
- f0_fb  = f_ref - P^Z n_fb
- f0_all = f_ref - P^Z n_global - P^{N,nFB} x
- ram_pos = fmax - frm - f0,   ram_neg = -fmax + frm - f0
- amr_pos = max[minram * fmax + frm + f0_all - fmax, 0]
- amr_neg = min[-minram * fmax - frm + f0_all + fmax, 0]
- final ram = ram + amr, then pos >= core_floor * fmax and neg <= -core_floor * fmax
- RAMs keep their sign: positive RAMs are positive, negative RAMs negative
"""

from dataclasses import dataclass

import numpy as np
import pandas as pd

from .config import Setup
from .sensitivity import border_ptdf, zonal_ptdf


@dataclass(frozen=True, eq=False)
class D2Reference:
    hours: tuple
    f_ref: np.ndarray  # hours x CNECs
    np_fb_d2: np.ndarray  # hours x FB zones
    ex_d2: np.ndarray  # hours x borders
    np_global_d2: np.ndarray  # hours x FB zones


@dataclass(frozen=True, eq=False)
class RamSet:
    raw_pos: np.ndarray
    raw_neg: np.ndarray
    amr_pos: np.ndarray
    amr_neg: np.ndarray
    pos: np.ndarray
    neg: np.ndarray


@dataclass(frozen=True, eq=False)
class CapacityParams:
    hours: tuple
    cnec_ids: tuple
    f0_fb: np.ndarray
    f0_all: np.ndarray
    fuaf: np.ndarray
    ram: dict  # Setup -> RamSet

    @property
    def amr_pos(self):
        return self.ram[Setup.SHC].amr_pos

    @property
    def amr_neg(self):
        return self.ram[Setup.SHC].amr_neg


def reference_flows(d2, cnecs, grid):
    """
    D-2 reference flows and net positions seen by a CNEC set.

    Args:
        d2 (D2Solution): Solved base case.
        cnecs (CnecSet): CNECs whose flows are needed.
        grid (GridModel): Grid of the base case.

    Returns:
        D2Reference
    """
    f_ref = d2.injection @ cnecs.ptdf.T
    np_global = d2.net_position - d2.exchange @ grid.border_fb_share
    return D2Reference(d2.hours, f_ref, d2.net_position, d2.exchange, np_global)


def zero_balance_flows(d2, ptdf_z, ptdf_border):
    """
    Flows without FB trade (f0_fb), without any trade (f0_all) and the UAF.

    Args:
        d2 (D2Reference): Reference flows and D-2 positions.
        ptdf_z (ZonalPtdf): CNEC x physical FB zone PTDF.
        ptdf_border (np.ndarray): CNEC x border PTDF of the end nodes.

    Returns:
        tuple: (f0_fb, f0_all, fuaf), each hours x CNECs.
    """
    pz = ptdf_z.matrix
    n_cnecs = d2.f_ref.shape[1]
    if pz.shape != (n_cnecs, d2.np_fb_d2.shape[1]):
        raise ValueError(f"zonal PTDF {pz.shape} does not match {n_cnecs} CNECs x "
                         f"{d2.np_fb_d2.shape[1]} zones")
    if ptdf_border.shape != (n_cnecs, d2.ex_d2.shape[1]):
        raise ValueError(f"border PTDF {ptdf_border.shape} does not match {n_cnecs} CNECs x "
                         f"{d2.ex_d2.shape[1]} borders")
    if d2.np_global_d2.shape != d2.np_fb_d2.shape:
        raise ValueError("global and FB net positions differ in shape")

    f0_fb = d2.f_ref - d2.np_fb_d2 @ pz.T
    f0_all = d2.f_ref - d2.np_global_d2 @ pz.T - d2.ex_d2 @ ptdf_border.T
    fuaf = f0_fb - f0_all
    return f0_fb, f0_all, fuaf


def adjustment_for_minram(f0_all, fmax, frm, minram_factor):
    amr_pos = np.maximum(minram_factor * fmax + frm + f0_all - fmax, 0.0)
    amr_neg = np.minimum(-minram_factor * fmax - frm + f0_all + fmax, 0.0)
    return amr_pos, amr_neg


def compute_rams(f0_fb, f0_all, fmax, frm, minram_factor=0.7, core_floor=0.2,
                 floor_ahc=True, hours=(), cnec_ids=()):
    """
    RAMs for both hybrid-coupling setups with minRAM adjustment and floor.

    Args:
        f0_fb (np.ndarray): hours x CNECs flows without FB trade.
        f0_all (np.ndarray): hours x CNECs flows at zero balance.
        fmax (np.ndarray): Per CNEC capacity.
        frm (np.ndarray): Per CNEC flow reliability margin.
        minram_factor (float): Share of fmax guaranteed to trade (0.7).
        core_floor (float): Minimum final RAM as share of fmax (0.2).
        floor_ahc (bool): Also apply the floor to the AHC RAMs.

    Returns:
        CapacityParams
    """
    if not 0 < core_floor < minram_factor <= 1:
        raise ValueError("need 0 < core_floor < minram_factor <= 1")
    fmax = np.asarray(fmax, dtype=float)
    frm = np.asarray(frm, dtype=float)

    ram = {}
    for setup, f0 in ((Setup.SHC, f0_fb), (Setup.AHC, f0_all)):
        raw_pos = fmax - frm - f0
        raw_neg = -fmax + frm - f0
        # AMR only ever depends on f0_all
        amr_pos, amr_neg = adjustment_for_minram(f0_all, fmax, frm, minram_factor)
        pos = raw_pos + amr_pos
        neg = raw_neg + amr_neg
        if setup == Setup.SHC or floor_ahc:
            pos = np.maximum(pos, core_floor * fmax)
            neg = np.minimum(neg, -core_floor * fmax)
        ram[setup] = RamSet(raw_pos, raw_neg, amr_pos, amr_neg, pos, neg)

    return CapacityParams(tuple(hours), tuple(cnec_ids), f0_fb, f0_all, f0_fb - f0_all, ram)


def minram_check(cp, fmax, minram_factor=0.7, core_floor=0.2, tol=1e-6):
    """
    Post-hoc check of the minimum-capacity rules.

    Rules per setup:
    - SHC minram: final RAM + fuaf >= minram_factor * fmax, the reserved UAF
      counting as capacity given to trade.
    - AHC minram: final RAM >= minram_factor * fmax on its own. No UAF is
      reserved in AHC; adding fuaf here would count the border flows twice.
    - Both: |final RAM| >= core_floor * fmax.

    Returns:
        pd.DataFrame: One row per (setup, rule) with violation count and worst gap.
    """
    fmax = np.asarray(fmax, dtype=float)
    rows = []
    for setup, ram in cp.ram.items():
        uaf = cp.fuaf if setup == Setup.SHC else 0.0
        checks = {
            "minram_pos": (ram.pos + uaf) - minram_factor * fmax,
            "minram_neg": -minram_factor * fmax - (ram.neg + uaf),
            "floor_pos": ram.pos - core_floor * fmax,
            "floor_neg": -core_floor * fmax - ram.neg,
        }
        for rule, margin in checks.items():
            margin = np.atleast_2d(margin)
            rows.append({
                "setup": setup.value,
                "rule": rule,
                "violations": int((margin < -tol).sum()),
                "worst_margin": float(margin.min()) if margin.size else 0.0,
            })
    return pd.DataFrame(rows)


def amr_invariance_check(cp):
    """
    Confirm the AMR is the same in both setups and the RAM algebra holds.

    Returns:
        dict: amr_max_abs_diff, ram_identity_residual, fuaf_zero and
        (when fuaf is zero everywhere) whether final SHC/AHC RAMs coincide.
    """
    shc, ahc = cp.ram[Setup.SHC], cp.ram[Setup.AHC]
    amr_diff = max(_max_abs(shc.amr_pos - ahc.amr_pos), _max_abs(shc.amr_neg - ahc.amr_neg))
    identity = max(_max_abs(ahc.raw_pos - shc.raw_pos - cp.fuaf),
                   _max_abs(ahc.raw_neg - shc.raw_neg - cp.fuaf))
    fuaf_zero = bool(not np.any(cp.fuaf))
    report = {
        "amr_max_abs_diff": amr_diff,
        "ram_identity_residual": identity,
        "fuaf_zero": fuaf_zero,
    }
    if fuaf_zero:
        report["final_rams_identical"] = bool(
            np.array_equal(shc.pos, ahc.pos) and np.array_equal(shc.neg, ahc.neg))
    return report


def run_capacity_calculation(grid, sens, d2, config, setup):
    """
    Flow-based parameters of one setup's CNEC set from the D-2 base case.

    The zero-balance flows always use the physical FB zones (SHC GSK); the
    setup only decides which CNECs are monitored.
    """
    setup = Setup(setup)
    cnecs = sens.cnecs[setup]
    ref = reference_flows(d2, cnecs, grid)
    ptdf_z = zonal_ptdf(cnecs.ptdf, cnecs.ids, sens.gsk[Setup.SHC])
    f0_fb, f0_all, _ = zero_balance_flows(ref, ptdf_z, border_ptdf(cnecs.ptdf, grid))
    cp = compute_rams(f0_fb, f0_all, cnecs.fmax, cnecs.frm,
                      minram_factor=config.minram_factor, core_floor=config.core_floor,
                      floor_ahc=config.floor_ahc, hours=d2.hours, cnec_ids=cnecs.ids)
    report = amr_invariance_check(cp)
    print(f"Capacity calculation ({setup.value.upper()} CNECs): {len(cnecs)} CNECs x "
          f"{len(d2.hours)} hours, mean |fuaf| {np.abs(cp.fuaf).mean() if cp.fuaf.size else 0:.1f} MW, "
          f"AMR diff {report['amr_max_abs_diff']:.2e}")
    return cp


def capacity_frame(cp, cnecs):
    """Long table (hour, CNEC) of all flow-based parameters for CSV export."""
    hours = np.repeat(np.asarray(cp.hours), len(cp.cnec_ids))
    n_hours = len(cp.hours)

    def flat(arr):
        return np.asarray(arr).reshape(-1)

    shc, ahc = cp.ram[Setup.SHC], cp.ram[Setup.AHC]
    return pd.DataFrame({
        "hour": hours,
        "cnec": list(cp.cnec_ids) * n_hours,
        "monitored": list(cnecs.monitored) * n_hours,
        "contingency": [c or "" for c in cnecs.contingency] * n_hours,
        "f0_fb": flat(cp.f0_fb),
        "f0_all": flat(cp.f0_all),
        "fuaf": flat(cp.fuaf),
        "ram_raw_pos_shc": flat(shc.raw_pos),
        "ram_raw_neg_shc": flat(shc.raw_neg),
        "ram_raw_pos_ahc": flat(ahc.raw_pos),
        "ram_raw_neg_ahc": flat(ahc.raw_neg),
        "ram_pos_shc": flat(shc.pos),
        "ram_neg_shc": flat(shc.neg),
        "ram_pos_ahc": flat(ahc.pos),
        "ram_neg_ahc": flat(ahc.neg),
        "amr_pos": flat(shc.amr_pos),
        "amr_neg": flat(shc.amr_neg),
    })


def capacity_from_frame(frame, cnec_ids):
    """Inverse of ``capacity_frame`` for a known CNEC order."""
    hours = tuple(int(h) for h in dict.fromkeys(frame["hour"]))
    present = tuple(dict.fromkeys(frame["cnec"].astype(str)))
    if present != tuple(cnec_ids):
        raise ValueError("capacity table CNECs do not match the recomputed CNEC set")

    def grid_of(column):
        return frame[column].to_numpy(dtype=float).reshape(len(hours), len(cnec_ids))

    amr_pos, amr_neg = grid_of("amr_pos"), grid_of("amr_neg")
    ram = {
        setup: RamSet(grid_of(f"ram_raw_pos_{setup.value}"), grid_of(f"ram_raw_neg_{setup.value}"),
                      amr_pos, amr_neg, grid_of(f"ram_pos_{setup.value}"),
                      grid_of(f"ram_neg_{setup.value}"))
        for setup in Setup
    }
    return CapacityParams(hours, tuple(cnec_ids), grid_of("f0_fb"), grid_of("f0_all"),
                          grid_of("fuaf"), ram)


def _max_abs(arr):
    arr = np.asarray(arr)
    return float(np.abs(arr).max()) if arr.size else 0.0


def select_hours(cp, hours):
    """Restrict capacity parameters to a subset of their hours (in the given order)."""
    missing = [h for h in hours if h not in cp.hours]
    if missing:
        raise ValueError(f"capacity parameters lack hours {list(missing)[:5]}")
    rows = [cp.hours.index(h) for h in hours]
    ram = {
        setup: RamSet(*(getattr(r, name)[rows] for name in
                        ("raw_pos", "raw_neg", "amr_pos", "amr_neg", "pos", "neg")))
        for setup, r in cp.ram.items()
    }
    return CapacityParams(tuple(hours), cp.cnec_ids, cp.f0_fb[rows], cp.f0_all[rows],
                          cp.fuaf[rows], ram)


def uaf_sensitivity(cnecs, grid, gsk):
    """
    CNEC x border flow caused by one MW of NTC exchange minus its zonal share.

    fuaf = x @ S.T: the border injects at its end nodes, the receiving FB zone
    absorbs the same MW through its GSK.
    """
    ptdf_z = zonal_ptdf(cnecs.ptdf, cnecs.ids, gsk).matrix
    return border_ptdf(cnecs.ptdf, grid) - ptdf_z @ grid.border_fb_share.T
