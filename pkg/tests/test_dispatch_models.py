import numpy as np
import pytest

from fbmc_sim.capacity_calc import RamSet
from fbmc_sim.config import ScenarioConfig, Setup
from fbmc_sim.dispatch_models import (D0Solution, account_costs, audit_d0, audit_d1, audit_d2,
                                      redispatch_penalties, solve_d0, solve_d1_ahc, solve_d1_shc,
                                      solve_d2)
from fbmc_sim.errors import GridDataError, SolverError
from fbmc_sim.grid_model import derive_virtual_zones
from fbmc_sim.sensitivity import build_sensitivities

HOURS = (1, 2)
TOL = 1e-6


def uniform_rams(cnecs, value, hours=HOURS):
    pos = np.full((len(hours), len(cnecs)), value, dtype=float)
    return RamSet(pos, -pos, np.zeros_like(pos), np.zeros_like(pos), pos, -pos)


@pytest.fixture
def toy_sens(toy_grid, toy_config):
    return build_sensitivities(derive_virtual_zones(toy_grid), toy_config)


def assert_audit_clean(report):
    for family, residual in report.items():
        assert residual <= TOL, family


def test_zero_demand_null_dispatch(make_toy_grid):
    grid = make_toy_grid(demand={"C": 0.0})
    d2 = solve_d2(grid, HOURS)
    assert not d2.generation.any()
    assert np.allclose(d2.exchange, 0.0)
    assert np.allclose(d2.net_position, 0.0)
    assert np.allclose(d2.objective, 0.0)


def test_d2_merit_order(toy_grid):
    d2 = solve_d2(toy_grid, HOURS)
    gen = dict(zip(toy_grid.plant_ids, d2.generation[0]))
    # cheapest plant pA covers FB demand and the non-FB zone through the border
    assert gen["pA"] == pytest.approx(80.0)
    assert gen["pN"] == pytest.approx(0.0)
    assert d2.exchange[0, 0] == pytest.approx(-20.0)
    assert d2.objective[0] == pytest.approx(800.0)
    np.testing.assert_allclose(d2.prices[0], 10.0)
    assert_audit_clean(audit_d2(toy_grid, d2))


def test_d2_respects_ntc(make_toy_grid):
    grid = make_toy_grid(demand={"C": 60.0, "N": 90.0})
    d2 = solve_d2(grid, HOURS)
    assert d2.exchange[0, 0] == pytest.approx(-50.0)
    assert d2.generation[0, grid.plant_index["pN"]] == pytest.approx(40.0)
    # the non-FB zone price is set by its own plant once the border is full
    assert d2.prices[0, grid.physical_zones.index("NF")] == pytest.approx(20.0)


def test_shc_without_limits_is_economic_dispatch(toy_grid, toy_config, toy_sens):
    grid = derive_virtual_zones(toy_grid)
    cnecs = toy_sens.cnecs[Setup.SHC]
    d1 = solve_d1_shc(grid, cnecs, uniform_rams(cnecs, 1e7), HOURS, toy_config)
    d2 = solve_d2(grid, HOURS)
    np.testing.assert_allclose(d1.objective, d2.objective, rtol=1e-9)
    assert_audit_clean(audit_d1(grid, d1, cnecs, uniform_rams(cnecs, 1e7)))


def test_zero_rams_and_ntc_give_autarky(toy_grid, toy_config, toy_sens):
    grid = derive_virtual_zones(toy_grid.with_ntc({"X1": 0.0}))
    cnecs = toy_sens.cnecs[Setup.SHC]
    d1 = solve_d1_shc(grid, cnecs, uniform_rams(cnecs, 0.0), HOURS, toy_config)
    assert np.allclose(d1.exchange, 0.0)
    assert d1.objective[0] == pytest.approx(60.0 * 50.0 + 20.0 * 20.0)
    free = solve_d1_shc(grid, cnecs, uniform_rams(cnecs, 1e7), HOURS, toy_config)
    assert (d1.objective >= free.objective - TOL).all()


def test_ahc_vbz_position_equals_exchange(toy_grid, toy_config, toy_sens):
    grid = derive_virtual_zones(toy_grid)
    cnecs = toy_sens.cnecs[Setup.AHC]
    rams = uniform_rams(cnecs, 80.0)
    d1 = solve_d1_ahc(grid, cnecs, rams, HOURS, toy_config)
    assert d1.vbz_ids == ("VBZ_X1",)
    np.testing.assert_allclose(d1.vbz_position[:, 0], d1.exchange[:, 0], atol=TOL)
    report = audit_d1(grid, d1, cnecs, rams)
    assert "vbz_identity" in report
    assert_audit_clean(report)


def test_ahc_positions_balance_with_virtual_zones(toy_grid, toy_config, toy_sens):
    grid = derive_virtual_zones(toy_grid)
    cnecs = toy_sens.cnecs[Setup.AHC]
    d1 = solve_d1_ahc(grid, cnecs, uniform_rams(cnecs, 1e7), HOURS, toy_config)
    exchange = d1.exchange.sum(axis=1)
    # pA at 10 supplies NF through the border, so the exchange stays open
    np.testing.assert_allclose(exchange, -20.0, atol=TOL)
    np.testing.assert_allclose(d1.net_position.sum(axis=1), -exchange, atol=TOL)
    np.testing.assert_allclose(d1.net_position.sum(axis=1) + d1.vbz_position.sum(axis=1), 0.0, atol=TOL)

    shc = solve_d1_shc(grid, toy_sens.cnecs[Setup.SHC], uniform_rams(toy_sens.cnecs[Setup.SHC], 1e7),
                       HOURS, toy_config)
    np.testing.assert_allclose(shc.net_position.sum(axis=1), 0.0, atol=TOL)


def test_ahc_closed_border_keeps_vbz_at_zero(toy_grid, toy_config, toy_sens):
    grid = derive_virtual_zones(toy_grid.with_ntc({"X1": 0.0}))
    cnecs = toy_sens.cnecs[Setup.AHC]
    d1 = solve_d1_ahc(grid, cnecs, uniform_rams(cnecs, 80.0), HOURS, toy_config)
    np.testing.assert_allclose(d1.vbz_position, 0.0, atol=TOL)


def test_ahc_vbz_bounds(toy_grid, toy_config, toy_sens):
    grid = derive_virtual_zones(toy_grid)
    cnecs = toy_sens.cnecs[Setup.AHC]
    d1 = solve_d1_ahc(grid, cnecs, uniform_rams(cnecs, 1e7), HOURS, toy_config,
                      vbz_bounds={"X1": (-5.0, 5.0)})
    assert (np.abs(d1.exchange) <= 5.0 + TOL).all()


def test_d0_without_congestion(toy_grid, toy_config, toy_sens):
    grid = derive_virtual_zones(toy_grid)
    cnecs = toy_sens.cnecs[Setup.SHC]
    d1 = solve_d1_shc(grid, cnecs, uniform_rams(cnecs, 1e7), HOURS, toy_config)
    d0 = solve_d0(grid, toy_sens.lc, d1, config=toy_config)
    assert np.allclose(d0.rd_pos, 0.0, atol=TOL)
    assert np.allclose(d0.rd_neg, 0.0, atol=TOL)
    assert np.allclose(d0.curtailment, 0.0, atol=TOL)
    costs = account_costs(grid, d1, d0, toy_config.penalties)
    assert costs.cm_cost == pytest.approx(0.0, abs=TOL)
    assert_audit_clean(audit_d0(grid, d0, d1, toy_sens.lc))


def test_d0_redispatch_pair_relieves_overload(make_toy_grid, toy_config):
    grid = derive_virtual_zones(make_toy_grid(demand={"C": 180.0, "N": 20.0}))
    sens = build_sensitivities(grid, toy_config)
    cnecs = sens.cnecs[Setup.SHC]
    d1 = solve_d1_shc(grid, cnecs, uniform_rams(cnecs, 1e7), HOURS, toy_config)
    assert d1.generation[0, grid.plant_index["pA"]] == pytest.approx(200.0)
    d0 = solve_d0(grid, sens.lc, d1, config=toy_config)
    up, down = d0.rd_pos.sum(axis=1), d0.rd_neg.sum(axis=1)
    assert (up > 1.0).all()
    np.testing.assert_allclose(up, down, atol=TOL)
    assert d0.rd_neg[0, grid.plant_index["pA"]] > 0.0
    report = audit_d0(grid, d0, d1, sens.lc)
    assert_audit_clean(report)
    limit = sens.lc.fmax - sens.lc.frm
    assert (np.abs(d0.flows) <= limit + TOL).all()


def test_negative_redispatch_cost(toy_grid, toy_config, toy_sens):
    grid = derive_virtual_zones(toy_grid)
    cnecs = toy_sens.cnecs[Setup.SHC]
    d1 = solve_d1_shc(grid, cnecs, uniform_rams(cnecs, 1e7, hours=(1,)), (1,), toy_config)
    zeros_p = np.zeros((1, len(grid.plants)))
    zeros_n = np.zeros((1, len(grid.nodes)))
    rd_neg = zeros_p.copy()
    rd_neg[0, grid.plant_index["pC"]] = 10.0
    d0 = D0Solution(Setup.SHC, (1,), (), zeros_p, rd_neg, zeros_n, zeros_n, np.zeros((1, 0)),
                    np.zeros(1))
    costs = account_costs(grid, d1, d0)
    assert costs.cm_cost == pytest.approx(-500.0)
    zc = costs.by_zone.set_index("zone").loc["ZC"]
    assert zc["redispatch_cost"] == pytest.approx(-500.0)


def test_redispatch_penalties(toy_grid):
    pos, neg = redispatch_penalties(toy_grid, 1, ScenarioConfig().penalties)
    idx = toy_grid.plant_index
    assert pos[idx["pA"]] == pytest.approx(100.0 + 1.2 * 10.0)
    assert pos[idx["pN"]] == pytest.approx(500.0 + 1.2 * 20.0)
    assert neg[idx["pC"]] == pytest.approx(100.0)
    assert neg[idx["pA"]] == pytest.approx(100.0 + 1.2 * 50.0 - 1.2 * 10.0)


def test_infeasible_hour_raises(make_toy_grid):
    grid = make_toy_grid(demand={"C": 2000.0})
    with pytest.raises(SolverError) as info:
        solve_d2(grid, HOURS)
    assert info.value.stage == "d2"
    assert info.value.hour in HOURS


def test_balance_slack_absorbs_shortage(make_toy_grid):
    grid = make_toy_grid(demand={"C": 2000.0})
    d2 = solve_d2(grid, HOURS, ScenarioConfig(balance_slack_penalty=1e4))
    assert d2.balance_slack.sum() > 0.0


def test_hours_outside_horizon(toy_grid):
    with pytest.raises(GridDataError):
        solve_d2(toy_grid, (1, 5))


def test_rams_shape_checked(toy_grid, toy_config, toy_sens):
    cnecs = toy_sens.cnecs[Setup.SHC]
    with pytest.raises(ValueError):
        solve_d1_shc(derive_virtual_zones(toy_grid), cnecs, uniform_rams(cnecs, 1.0, hours=(1,)),
                     HOURS, toy_config)
