import numpy as np
import pandas as pd
import pytest

from fbmc_sim.config import ScenarioConfig
from fbmc_sim.grid_model import grid_from_tables
from fbmc_sim.sensitivity import build_sensitivities
from fbmc_sim.study import prepare_grid
from fbmc_sim.synthetic_grid import synthetic_grid

# Toy system: three FB zones (ZA slack zone, ZB with two nodes, ZC) in two
# meshes A-B-C and B-B2-C, plus one non-FB zone NF coupled at node B.
TOY_NODES = [("A", "ZA", 1), ("B", "ZB", 0), ("B2", "ZB", 0), ("C", "ZC", 0), ("N", "NF", 0)]
TOY_LINES = [("AB", "A", "B"), ("BC", "B", "C"), ("CA", "C", "A"), ("BB2", "B", "B2"), ("B2C", "B2", "C")]
TOY_PLANTS = [
    ("pA", "A", 200.0, 10.0, 1),
    ("pB", "B", 200.0, 30.0, 1),
    ("pB2", "B2", 200.0, 35.0, 1),
    ("pC", "C", 200.0, 50.0, 1),
    ("pN", "N", 100.0, 20.0, 1),
]
TOY_DEMAND = {"A": 0.0, "B": 0.0, "B2": 0.0, "C": 60.0, "N": 20.0}


def long_series(values, hours):
    """hour,node,value rows from {node: scalar or per-hour sequence}."""
    rows = []
    for node, value in values.items():
        per_hour = np.broadcast_to(np.asarray(value, dtype=float), (hours,))
        rows.extend((h + 1, node, float(per_hour[h])) for h in range(hours))
    return pd.DataFrame(rows, columns=["hour", "node", "value"])


def toy_tables(hours=2, demand=None, res=None, ntc=50.0, fmax=100.0):
    return {
        "nodes": pd.DataFrame(TOY_NODES, columns=["id", "zone", "is_slack"]),
        "lines": pd.DataFrame([(i, a, b, 1.0, fmax) for i, a, b in TOY_LINES],
                              columns=["id", "from", "to", "susceptance", "fmax"]),
        "zones": pd.DataFrame([("ZA", "fb"), ("ZB", "fb"), ("ZC", "fb"), ("NF", "non_fb")],
                              columns=["id", "kind"]),
        "borders": pd.DataFrame([("X1", "NF", "B", 1.0, ntc)],
                                columns=["id", "non_fb_zone", "end_node", "weight", "ntc_mw"]),
        "plants": pd.DataFrame(TOY_PLANTS, columns=["id", "node", "g_max", "c_var", "redispatchable"]),
        "demand": long_series(demand if demand is not None else TOY_DEMAND, hours),
        "res": long_series(res if res is not None else {"A": 0.0}, hours),
    }


@pytest.fixture
def make_toy_tables():
    return toy_tables


@pytest.fixture
def make_toy_grid():
    def factory(**kwargs):
        return grid_from_tables(**toy_tables(**kwargs), name="toy")
    return factory


@pytest.fixture
def toy_grid(make_toy_grid):
    return make_toy_grid()


@pytest.fixture
def toy_config():
    return ScenarioConfig(hours=(1, 2), sigma_fb=0.0, sigma_nonfb=0.0, threshold=0.01,
                          domain_hours=(1,))


@pytest.fixture(scope="session")
def bundled_grid():
    return synthetic_grid(hours=168, seed=7)


@pytest.fixture(scope="session")
def bundled_config():
    return ScenarioConfig(seed=42)


@pytest.fixture(scope="session")
def bundled_prepared(bundled_grid, bundled_config):
    return prepare_grid(bundled_grid, bundled_config)


@pytest.fixture(scope="session")
def bundled_sens(bundled_prepared, bundled_config):
    return build_sensitivities(bundled_prepared, bundled_config)
