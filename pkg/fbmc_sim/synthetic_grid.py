"""
Bundled test network.

Three flow-based zones, each a 5 x 6 meshed lattice, joined by nine tie lines
(156 AC lines in total), and three single-node non-FB zones, each coupled
through one NTC border at a single end node (weight 1.0).

Everything is generated from a seed so the network can be rebuilt instead of
shipped: plants with zone-specific cost levels, hourly demand with a daily and
weekly shape, and wind/solar availability with seeded noise.
"""

import logging
from pathlib import Path

import numpy as np
import pandas as pd

from .grid_model import grid_from_tables, save_grid

logger = logging.getLogger(__name__)

ROWS, COLS = 5, 6
FB_ZONES = ("Z1", "Z2", "Z3")
NON_FB = {
    # zone: (border, end node, ntc, peak demand, wind capacity)
    "NF1": ("B1", "Z1_12", 1750.0, 2200.0, 400.0),
    "NF2": ("B2", "Z2_13", 2500.0, 2600.0, 2200.0),
    "NF3": ("B3", "Z3_32", 2500.0, 2400.0, 600.0),
}
TIE_LINES = (
    ("Z1_05", "Z2_00"), ("Z1_25", "Z2_20"), ("Z1_45", "Z2_40"),
    ("Z1_41", "Z3_01"), ("Z1_43", "Z3_03"), ("Z1_44", "Z3_04"),
    ("Z2_41", "Z3_05"), ("Z2_42", "Z3_15"), ("Z2_44", "Z3_35"),
)
# technology: (g_max, c_var, redispatchable)
TECHNOLOGIES = {
    "nuclear": (1100.0, 12.0, True),
    "lignite": (800.0, 32.0, True),
    "coal": (700.0, 44.0, True),
    "ccgt": (550.0, 62.0, True),
    "ocgt": (350.0, 95.0, True),
    "oil": (250.0, 140.0, False),
}
ZONE_FLEET = {
    "Z1": (("nuclear", 0.85), ("lignite", 0.9), ("coal", 0.9), ("ccgt", 0.95), ("ccgt", 0.95),
           ("ocgt", 1.0), ("ocgt", 1.0), ("oil", 1.0), ("coal", 0.95), ("ccgt", 1.0)),
    "Z2": (("lignite", 1.0), ("coal", 1.05), ("ccgt", 1.0), ("ccgt", 1.05), ("ocgt", 1.0),
           ("ocgt", 1.05), ("oil", 1.0), ("coal", 1.0), ("ccgt", 1.0), ("nuclear", 1.1)),
    "Z3": (("coal", 1.2), ("ccgt", 1.15), ("ccgt", 1.2), ("ocgt", 1.15), ("ocgt", 1.2),
           ("oil", 1.1), ("lignite", 1.25), ("ccgt", 1.1), ("coal", 1.15), ("ocgt", 1.1)),
}
NON_FB_FLEET = {
    "NF1": (("hydro", 2600.0, 8.0), ("ccgt", 1600.0, 70.0)),
    "NF2": (("ccgt", 2500.0, 58.0), ("ocgt", 2700.0, 100.0)),
    "NF3": (("coal", 2200.0, 38.0), ("ocgt", 2900.0, 110.0)),
}
FB_PEAK_DEMAND = {"Z1": 5200.0, "Z2": 4800.0, "Z3": 4400.0}
FB_WIND = {"Z1": 1400.0, "Z2": 2600.0, "Z3": 1600.0}
FB_SOLAR = {"Z1": 900.0, "Z2": 700.0, "Z3": 1300.0}


def _node(zone, r, c):
    return f"{zone}_{r}{c}"


def _profiles(hours, rng):
    h = np.arange(hours)
    daily = np.sin(2 * np.pi * (h % 24 - 7) / 24)
    weekday = np.where((h // 24) % 7 >= 5, 0.88, 1.0)
    load = (0.78 + 0.18 * np.clip(daily, -0.6, 1.0)) * weekday
    solar = np.clip(np.sin(np.pi * (h % 24 - 6) / 12), 0.0, None)
    wind = np.clip(0.45 + 0.3 * np.sin(2 * np.pi * h / 61 + 1.3)
                   + 0.12 * rng.standard_normal(hours), 0.02, 1.0)
    return load, solar, wind


def synthetic_tables(hours=168, seed=7):
    """DataFrames of the bundled network shaped like the grid CSV files."""
    rng = np.random.default_rng(seed)
    load, solar, wind = _profiles(hours, rng)

    nodes, lines = [], []
    for zone in FB_ZONES:
        for r in range(ROWS):
            for c in range(COLS):
                nodes.append((_node(zone, r, c), zone, int(zone == "Z1" and r == 0 and c == 0)))
                if c + 1 < COLS:
                    lines.append((_node(zone, r, c), _node(zone, r, c + 1)))
                if r + 1 < ROWS:
                    lines.append((_node(zone, r, c), _node(zone, r + 1, c)))
    for zone in NON_FB:
        nodes.append((f"{zone}_0", zone, 0))

    end_nodes = {spec[1] for spec in NON_FB.values()}
    line_rows = []
    for k, (a, b) in enumerate(lines):
        fmax = 1750.0 if a in end_nodes or b in end_nodes else float(rng.integers(18, 36) * 50)
        line_rows.append((f"L{k + 1:03d}", a, b, round(float(rng.uniform(6.0, 14.0)), 3), fmax))
    for k, (a, b) in enumerate(TIE_LINES):
        line_rows.append((f"T{k + 1:02d}", a, b, round(float(rng.uniform(4.0, 8.0)), 3), 1500.0))

    zones = [(z, "fb", None) for z in FB_ZONES] + [(z, "non_fb", None) for z in NON_FB]
    borders = [(spec[0], zone, spec[1], 1.0, spec[2]) for zone, spec in NON_FB.items()]

    plants = []
    fb_nodes = {z: [_node(z, r, c) for r in range(ROWS) for c in range(COLS)] for z in FB_ZONES}
    for zone, fleet in ZONE_FLEET.items():
        sites = rng.choice(len(fb_nodes[zone]), size=len(fleet), replace=False)
        for k, ((tech, factor), site) in enumerate(zip(fleet, sites)):
            g_max, c_var, rd = TECHNOLOGIES[tech]
            plants.append((f"{zone}_{tech}_{k}", fb_nodes[zone][site], g_max,
                           round(c_var * factor, 2), int(rd)))
    for zone, fleet in NON_FB_FLEET.items():
        for k, (tech, g_max, c_var) in enumerate(fleet):
            plants.append((f"{zone}_{tech}_{k}", f"{zone}_0", g_max, c_var, 1))

    demand, res = [], []
    for zone in FB_ZONES:
        share = rng.dirichlet(np.full(len(fb_nodes[zone]), 4.0))
        wind_sites = rng.choice(len(fb_nodes[zone]), size=5, replace=False)
        solar_sites = rng.choice(len(fb_nodes[zone]), size=4, replace=False)
        for i, node in enumerate(fb_nodes[zone]):
            demand.append((node, FB_PEAK_DEMAND[zone] * share[i] * load))
            avail = np.zeros(hours)
            if i in wind_sites:
                local = np.clip(wind * rng.uniform(0.8, 1.2) + 0.05 * rng.standard_normal(hours), 0, 1)
                avail += FB_WIND[zone] / len(wind_sites) * local
            if i in solar_sites:
                avail += FB_SOLAR[zone] / len(solar_sites) * solar
            res.append((node, avail))
    for zone, spec in NON_FB.items():
        node = f"{zone}_0"
        demand.append((node, spec[3] * load))
        local = np.clip(wind * rng.uniform(0.8, 1.2) + 0.08 * rng.standard_normal(hours), 0, 1)
        res.append((node, spec[4] * local))

    def long(rows):
        hour = np.arange(1, hours + 1)
        return pd.concat([
            pd.DataFrame({"hour": hour, "node": node, "value": np.round(values, 3)})
            for node, values in rows
        ], ignore_index=True)

    return {
        "nodes": pd.DataFrame(nodes, columns=["id", "zone", "is_slack"]),
        "lines": pd.DataFrame(line_rows, columns=["id", "from", "to", "susceptance", "fmax"]),
        "zones": pd.DataFrame(zones, columns=["id", "kind", "attached_border"]),
        "borders": pd.DataFrame(borders, columns=["id", "non_fb_zone", "end_node", "weight", "ntc_mw"]),
        "plants": pd.DataFrame(plants, columns=["id", "node", "g_max", "c_var", "redispatchable"]),
        "demand": long(demand),
        "res": long(res),
    }


def synthetic_grid(hours=168, seed=7, frm_default=0.05):
    """The bundled network as a validated GridModel."""
    return grid_from_tables(**synthetic_tables(hours, seed), frm_default=frm_default,
                            name="bundled")


def write_test_network(path, hours=168, seed=7):
    """Generate the bundled network and write it as a grid directory."""
    grid = synthetic_grid(hours, seed)
    save_grid(grid, Path(path))
    logger.info("Wrote test network to %s: %s", path, grid.summary())
    return grid
