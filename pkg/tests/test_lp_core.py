import itertools
import math

import numpy as np
import pytest

from fbmc_sim.lp_core import LpModel, LpStatus, residuals, solve, write_lp


def test_single_variable_lower_bound_dual():
    model = LpModel()
    model.add_variable("x", cost=1.0)
    model.add_constraint("floor", {"x": 1.0}, ">=", 3.0)
    sol = solve(model)
    assert sol.status == LpStatus.OPTIMAL
    assert sol.value("x") == pytest.approx(3.0)
    assert sol.objective == pytest.approx(3.0)
    assert sol.dual("floor") == pytest.approx(1.0)


def test_contradictory_constraints_infeasible():
    model = LpModel()
    model.add_variable("x", cost=1.0)
    model.add_constraint("lo", {"x": 1.0}, ">=", 3.0)
    model.add_constraint("hi", {"x": 1.0}, "<=", 2.0)
    sol = solve(model)
    assert sol.status == LpStatus.INFEASIBLE
    assert not sol.optimal
    assert np.isnan(sol.x).all()


def test_unbounded():
    model = LpModel()
    model.add_variable("x", -math.inf, math.inf, cost=-1.0)
    assert solve(model).status == LpStatus.UNBOUNDED


def _transport():
    # two sources (cap 40, 35) to one sink needing 60 plus a side product
    model = LpModel(name="transport")
    model.add_variable("x1", 0.0, 40.0, 4.0)
    model.add_variable("x2", 0.0, 35.0, 6.0)
    model.add_variable("x3", 0.0, math.inf, 5.0)
    model.add_constraint("demand", {"x1": 1.0, "x2": 1.0, "x3": 1.0}, ">=", 60.0)
    model.add_constraint("blend", {"x1": 1.0, "x3": -2.0}, "<=", 10.0)
    model.add_constraint("mix", {"x2": 1.0, "x3": 1.0}, "==", 30.0)
    return model


def _vertex_optimum(model):
    """Brute force: every basic solution from 3 active rows/bounds, best feasible one."""
    rows, rhs = [], []
    for terms, sense, r in zip(model.con_terms, model.con_sense, model.con_rhs):
        row = np.zeros(model.n_vars)
        for k, v in terms.items():
            row[k] = v
        rows.append(row)
        rhs.append(r)
    for k, (lo, hi) in enumerate(zip(model.lower, model.upper)):
        for bound in (lo, hi):
            if math.isfinite(bound):
                row = np.zeros(model.n_vars)
                row[k] = 1.0
                rows.append(row)
                rhs.append(bound)
    best = math.inf
    for combo in itertools.combinations(range(len(rows)), model.n_vars):
        a = np.array([rows[i] for i in combo])
        if abs(np.linalg.det(a)) < 1e-12:
            continue
        x = np.linalg.solve(a, np.array([rhs[i] for i in combo]))
        if residuals(model, x).max() > 1e-9:
            continue
        if np.any(x < np.array(model.lower) - 1e-9) or np.any(x > np.array(model.upper) + 1e-9):
            continue
        best = min(best, float(np.dot(model.cost, x)))
    return best


def test_matches_vertex_enumeration():
    model = _transport()
    sol = solve(model)
    assert sol.optimal
    assert sol.objective == pytest.approx(_vertex_optimum(model))
    assert residuals(model, sol.x).max() < 1e-7


def test_strong_duality():
    sol = solve(_transport())
    assert sol.dual_objective == pytest.approx(sol.objective, rel=1e-7)


def test_scaled_objective():
    base = solve(_transport())
    scaled = solve(_transport().scaled(10.0))
    assert scaled.objective == pytest.approx(10.0 * base.objective)
    np.testing.assert_allclose(scaled.duals, 10.0 * base.duals, atol=1e-7)


def test_infinite_rhs():
    model = LpModel()
    model.add_variable("x", cost=1.0)
    assert model.add_constraint("free", {"x": 1.0}, "<=", math.inf) is None
    assert model.n_cons == 0
    with pytest.raises(ValueError):
        model.add_constraint("bad", {"x": 1.0}, "==", math.inf)


def test_rejects_bad_input():
    model = LpModel()
    model.add_variable("x")
    with pytest.raises(ValueError):
        model.add_variable("x")
    with pytest.raises(ValueError):
        model.add_constraint("nan", {"x": float("nan")}, "<=", 1.0)
    with pytest.raises(ValueError):
        model.add_constraint("sense", {"x": 1.0}, "<", 1.0)
    with pytest.raises(ValueError):
        model.add_constraint("rhs", {"x": 1.0}, "<=", float("nan"))


def test_write_lp(tmp_path):
    path = tmp_path / "transport.lp"
    write_lp(_transport(), path)
    text = path.read_text()
    assert text.startswith("\\ transport")
    assert "Minimize" in text and "Subject To" in text and text.rstrip().endswith("End")
    assert " mix: 1 x2 + 1 x3 = 30" in text
    assert "0 <= x1 <= 40" in text
