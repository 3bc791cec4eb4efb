"""
Stage artifacts on disk.

Each stage writes wide CSV tables indexed by hour plus a small ``meta.json``;
later stages (and re-runs of a single stage) read them back instead of
re-solving the earlier models.

Layout under the output directory:
- d2/                 D-2 base case
- capacity/           capacity_shc.csv, capacity_ahc.csv (one per CNEC set)
- d1_shc/, d1_ahc/    market results
- d0_shc/, d0_ahc/    congestion management results
"""

import hashlib
import json
from enum import Enum
from pathlib import Path
from types import SimpleNamespace

import numpy as np
import pandas as pd

from .capacity_calc import capacity_frame, capacity_from_frame
from .config import Setup
from .dispatch_models import D0Solution, D1Solution, D2Solution, nodal_injection
from .errors import StageDependencyError

MARKET_TABLES = {
    # solution attribute -> column id kind
    "generation": "plants",
    "curtailment": "nodes",
    "exchange": "borders",
    "net_position": "fb_zones",
    "vbz_position": "vbz",
    "prices": "zones",
    "generation_cost": "zones",
    "curtailment_cost": "zones",
    "balance_slack": "zones",
    "res": "nodes",
}
D0_TABLES = {
    "rd_pos": "plants",
    "rd_neg": "plants",
    "curtailment": "nodes",
    "injection": "nodes",
    "flows": "lc",
}


def convert_numpy(obj):
    """Recursively turn numpy scalars/arrays (and tuples) into JSON types."""
    if isinstance(obj, Enum):
        return obj.value
    if isinstance(obj, dict):
        return {str(convert_numpy(k)): convert_numpy(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [convert_numpy(v) for v in obj]
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return convert_numpy(obj.tolist())
    return obj


def write_json(data, path):
    with open(path, "w") as f:
        json.dump(convert_numpy(data), f, indent=2, sort_keys=True)
        f.write("\n")


def read_json(path):
    with open(path, "r") as f:
        return json.load(f)


def array_hash(*arrays):
    """sha256 over the raw bytes of the given arrays."""
    digest = hashlib.sha256()
    for arr in arrays:
        arr = np.ascontiguousarray(arr, dtype=float)
        digest.update(str(arr.shape).encode())
        digest.update(arr.tobytes())
    return digest.hexdigest()


def solution_hash(sol):
    """Fingerprint of a market solution (used for the SHC/AHC pairing check)."""
    return array_hash(sol.generation, sol.curtailment, sol.exchange, sol.net_position,
                      sol.prices, sol.objective)


def _columns(kind, grid, sol=None):
    # vbz/lc ids live on the solution, and only on the kind that has them
    if kind == "vbz":
        return getattr(sol, "vbz_ids", ())
    if kind == "lc":
        return getattr(sol, "lc_ids", ())
    return {
        "plants": grid.plant_ids,
        "nodes": grid.node_ids,
        "borders": grid.border_ids,
        "fb_zones": grid.fb_zones,
        "zones": grid.physical_zones,
    }[kind]


def _write_table(arr, hours, columns, path):
    df = pd.DataFrame(np.asarray(arr), index=pd.Index(hours, name="hour"), columns=list(columns))
    df.to_csv(path)


def _read_table(path, columns):
    if not path.exists():
        raise StageDependencyError(f"missing artifact {path}")
    df = pd.read_csv(path, index_col="hour")
    df.columns = [str(c) for c in df.columns]
    if list(df.columns) != [str(c) for c in columns]:
        raise StageDependencyError(f"{path} does not match the grid (columns differ)")
    return df.to_numpy(dtype=float).reshape(len(df), len(columns)), tuple(int(h) for h in df.index)


def save_market(sol, grid, directory):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for name, kind in MARKET_TABLES.items():
        _write_table(getattr(sol, name), sol.hours, _columns(kind, grid, sol), directory / f"{name}.csv")
    _write_table(sol.objective[:, None], sol.hours, ["objective"], directory / "objective.csv")
    write_json({"stage": sol.stage, "hours": sol.hours, "vbz_ids": sol.vbz_ids},
               directory / "meta.json")


def load_market(grid, directory):
    """Read a D-2 or D-1 solution written by ``save_market``."""
    directory = Path(directory)
    if not (directory / "meta.json").exists():
        raise StageDependencyError(f"no market result in {directory}")
    meta = read_json(directory / "meta.json")
    ids = SimpleNamespace(vbz_ids=tuple(meta["vbz_ids"]))
    tables = {}
    hours = None
    for name, kind in MARKET_TABLES.items():
        tables[name], hours = _read_table(directory / f"{name}.csv", _columns(kind, grid, ids))
    objective, _ = _read_table(directory / "objective.csv", ["objective"])
    t = np.asarray(hours) - 1
    cls = D2Solution if meta["stage"] == "d2" else D1Solution
    return cls(
        stage=meta["stage"],
        hours=hours,
        zone_ids=grid.physical_zones,
        fb_zone_ids=grid.fb_zones,
        vbz_ids=ids.vbz_ids,
        objective=objective[:, 0],
        injection=nodal_injection(grid, tables["generation"], tables["curtailment"],
                                  tables["res"], grid.series.demand[t]),
        **tables,
    )


def save_d0(sol, grid, directory):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for name, kind in D0_TABLES.items():
        _write_table(getattr(sol, name), sol.hours, _columns(kind, grid, sol), directory / f"{name}.csv")
    _write_table(sol.objective[:, None], sol.hours, ["objective"], directory / "objective.csv")
    write_json({"setup": sol.setup, "hours": sol.hours, "lc_ids": sol.lc_ids}, directory / "meta.json")


def load_d0(grid, directory):
    directory = Path(directory)
    if not (directory / "meta.json").exists():
        raise StageDependencyError(f"no congestion-management result in {directory}")
    meta = read_json(directory / "meta.json")
    ids = SimpleNamespace(lc_ids=tuple(meta["lc_ids"]))
    tables = {}
    hours = None
    for name, kind in D0_TABLES.items():
        tables[name], hours = _read_table(directory / f"{name}.csv", _columns(kind, grid, ids))
    objective, _ = _read_table(directory / "objective.csv", ["objective"])
    return D0Solution(setup=Setup(meta["setup"]), hours=hours, lc_ids=ids.lc_ids,
                      objective=objective[:, 0], **tables)


def save_capacity(cp, cnecs, directory, setup):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    capacity_frame(cp, cnecs).to_csv(directory / f"capacity_{Setup(setup).value}.csv", index=False)


def load_capacity(directory, cnecs, setup):
    path = Path(directory) / f"capacity_{Setup(setup).value}.csv"
    if not path.exists():
        raise StageDependencyError(f"missing capacity artifact {path} (run --stage capacity first)")
    frame = pd.read_csv(path, dtype={"cnec": str, "monitored": str, "contingency": str})
    try:
        return capacity_from_frame(frame, cnecs.ids)
    except ValueError as e:
        raise StageDependencyError(f"{path}: {e}")
