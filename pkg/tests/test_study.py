import json
import warnings
from dataclasses import replace
from types import SimpleNamespace

import numpy as np
import pytest

from fbmc_sim.capacity_calc import uaf_sensitivity
from fbmc_sim.config import ScenarioConfig, Setup
from fbmc_sim.dispatch_models import solve_d2
from fbmc_sim.grid_model import derive_virtual_zones
from fbmc_sim.sensitivity import build_gsk, build_sensitivities
from fbmc_sim.study import (draw_factors, exchange_delta, fuaf_deviation, hop_distance_to_borders,
                            perturb_res, run_paired_study, write_report)


def test_zero_sigma_keeps_truth(bundled_grid):
    config = ScenarioConfig(sigma_fb=0.0, sigma_nonfb=0.0)
    np.testing.assert_array_equal(perturb_res(bundled_grid, config), bundled_grid.series.res_available)


def test_forecast_is_seeded(bundled_grid):
    a = perturb_res(bundled_grid, ScenarioConfig(seed=42))
    b = perturb_res(bundled_grid, ScenarioConfig(seed=42))
    c = perturb_res(bundled_grid, ScenarioConfig(seed=43))
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)
    assert (a >= 0.0).all()


def test_factor_spread():
    factors = draw_factors(np.random.default_rng(1), 0.2, (200_000,))
    assert factors.mean() == pytest.approx(1.0, abs=0.01)
    assert factors.std() == pytest.approx(0.2, rel=0.02)


def _ahc_toy(make_toy_grid):
    # ZB's plants sit on B and B2 while the border ends on B alone
    return derive_virtual_zones(make_toy_grid())


def test_perfect_forecast_gives_zero_deviation(make_toy_grid, toy_config):
    grid = _ahc_toy(make_toy_grid)
    sens = build_sensitivities(grid, toy_config)
    cnecs = sens.cnecs[Setup.SHC]
    d2 = solve_d2(grid, (1, 2))
    s = uaf_sensitivity(cnecs, grid, build_gsk(grid, Setup.SHC))
    cp = SimpleNamespace(hours=d2.hours, fuaf=d2.exchange @ s.T)
    deviation = fuaf_deviation(cp, d2, cnecs, grid)
    assert set(deviation["cne"]) == set(cnecs.cne_ids)
    np.testing.assert_allclose(deviation["deviation"], 0.0, atol=1e-12)


def test_deviation_follows_exchange_error(make_toy_grid, toy_config):
    grid = _ahc_toy(make_toy_grid)
    sens = build_sensitivities(grid, toy_config)
    cnecs = sens.cnecs[Setup.SHC]
    d2 = solve_d2(grid, (1, 2))
    s = uaf_sensitivity(cnecs, grid, build_gsk(grid, Setup.SHC))
    forecast = d2.exchange + 15.0
    cp = SimpleNamespace(hours=d2.hours, fuaf=forecast @ s.T)
    deviation = fuaf_deviation(cp, d2, cnecs, grid)
    mask = cnecs.n0_mask
    expected = (s[mask, 0] * -15.0 / cnecs.fmax[mask])
    got = deviation[deviation["hour"] == 1]["deviation"].to_numpy()
    np.testing.assert_allclose(got, expected, atol=1e-12)
    assert np.abs(expected).max() > 0.0


def test_hop_distance(toy_grid):
    distance = hop_distance_to_borders(toy_grid)
    assert distance["AB"] == 0
    assert distance["BB2"] == 0
    assert distance["CA"] == 1


def test_exchange_delta_needs_same_hours(toy_grid):
    d2 = solve_d2(toy_grid, (1, 2))
    other = solve_d2(toy_grid, (1,))
    with pytest.raises(ValueError):
        exchange_delta(d2, other, toy_grid)


@pytest.fixture
def toy_report(toy_grid, toy_config):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return run_paired_study(toy_grid, toy_config)


def test_paired_study_report(tmp_path, toy_report):
    report = toy_report
    assert set(report.runs) == {Setup.SHC, Setup.AHC}
    for run in report.runs.values():
        for stage in ("capacity", "d1", "d0", "d2"):
            for family, residual in run.audits[stage].items():
                if family.endswith("residual") or family == "amr_max_abs_diff":
                    assert residual <= 1e-6, family
                elif isinstance(residual, float):
                    assert residual <= 1e-6, (stage, family)
        assert (run.minram["violations"] == 0).all()
    write_report(report, tmp_path)
    for name in ("summary.json", "fig_results.csv", "fig_fuaf_dev.csv", "fig_exchange_delta.csv",
                 "fig_max_flows.csv", "fig_flow_decomposition.csv"):
        assert (tmp_path / name).exists(), name
    assert sorted(p.name for p in (tmp_path / "domains").iterdir()) == ["ahc_h0001.csv", "shc_h0001.csv"]
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["config"]["hours"] == [1, 2]
    assert set(summary["costs"]) == {"shc", "ahc"}


def test_paired_study_is_reproducible(tmp_path, toy_grid, toy_config, toy_report):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        again = run_paired_study(toy_grid, toy_config)
    write_report(toy_report, tmp_path / "a")
    write_report(again, tmp_path / "b")
    assert (tmp_path / "a" / "summary.json").read_bytes() == (tmp_path / "b" / "summary.json").read_bytes()


def test_setups_coincide_without_uaf(toy_grid, toy_config):
    """Closed borders and one CNEC set for both setups: nothing tells SHC and AHC apart."""
    config = replace(toy_config, ntc_overrides={"X1": 0.0})
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        report = run_paired_study(toy_grid, config)
    assert report.sens.cnecs[Setup.SHC].ids == report.sens.cnecs[Setup.AHC].ids
    shc, ahc = report.runs[Setup.SHC], report.runs[Setup.AHC]
    assert not shc.capacity.fuaf.any()
    np.testing.assert_allclose(shc.d1.objective, ahc.d1.objective, rtol=1e-9, atol=1e-6)
    assert shc.costs.total_cost == pytest.approx(ahc.costs.total_cost, abs=1e-6)
