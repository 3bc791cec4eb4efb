"""End-to-end properties on the bundled network. Slow: run with ``pytest -m slow``."""

import json
import warnings
from dataclasses import replace

import numpy as np
import pytest

from fbmc_sim.capacity_calc import (RamSet, amr_invariance_check, minram_check,
                                    run_capacity_calculation, select_hours, uaf_sensitivity)
from fbmc_sim.config import Setup
from fbmc_sim.dispatch_models import solve_d1_ahc, solve_d1_shc, solve_d2
from fbmc_sim.sensitivity import build_gsk
from fbmc_sim.study import run_paired_study, write_report

pytestmark = pytest.mark.slow

# two days; the pinned-market check uses the first
ACCEPTANCE_HOURS = tuple(range(1, 49))
ORACLE_HOURS = tuple(range(1, 25))


@pytest.fixture(scope="module")
def acceptance_config(bundled_config):
    return replace(bundled_config, hours=ACCEPTANCE_HOURS, domain_hours=(12,))


@pytest.fixture(scope="module")
def bundled_d2(bundled_prepared, acceptance_config):
    return solve_d2(bundled_prepared, acceptance_config.hours, acceptance_config)


@pytest.fixture(scope="module")
def bundled_capacity(bundled_prepared, bundled_sens, bundled_d2, acceptance_config):
    return {setup: run_capacity_calculation(bundled_prepared, bundled_sens, bundled_d2, acceptance_config, setup)
            for setup in Setup}


@pytest.fixture(scope="module")
def bundled_study(bundled_grid, acceptance_config):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return run_paired_study(bundled_grid, acceptance_config)


@pytest.mark.parametrize("setup", list(Setup))
def test_ram_algebra(bundled_capacity, setup):
    cp = bundled_capacity[setup]
    assert tuple(cp.hours) == ACCEPTANCE_HOURS
    shc, ahc = cp.ram[Setup.SHC], cp.ram[Setup.AHC]
    np.testing.assert_allclose(ahc.raw_pos - shc.raw_pos, cp.fuaf, atol=1e-9)
    np.testing.assert_allclose(ahc.raw_neg - shc.raw_neg, cp.fuaf, atol=1e-9)
    np.testing.assert_array_equal(shc.amr_pos, ahc.amr_pos)
    np.testing.assert_array_equal(shc.amr_neg, ahc.amr_neg)
    assert amr_invariance_check(cp)["amr_max_abs_diff"] == 0.0


@pytest.mark.parametrize("setup", list(Setup))
def test_fuaf_from_exchanges(bundled_prepared, bundled_sens, bundled_d2, bundled_capacity, setup):
    cnecs = bundled_sens.cnecs[setup]
    s = uaf_sensitivity(cnecs, bundled_prepared, build_gsk(bundled_prepared, Setup.SHC))
    np.testing.assert_allclose(bundled_capacity[setup].fuaf, bundled_d2.exchange @ s.T, atol=1e-6)


@pytest.mark.parametrize("setup", list(Setup))
def test_minram_compliance(bundled_sens, bundled_capacity, bundled_config, setup):
    report = minram_check(bundled_capacity[setup], bundled_sens.cnecs[setup].fmax,
                          bundled_config.minram_factor, bundled_config.core_floor)
    assert (report["violations"] == 0).all(), report


def test_pinned_ahc_matches_shc(bundled_prepared, bundled_sens, bundled_d2, bundled_capacity,
                                bundled_config):
    """VBZ positions pinned to the D-2 exchanges on the SHC CNECs: same market outcome."""
    grid = bundled_prepared
    config = replace(bundled_config, balance_slack_penalty=1e5)
    cnecs = bundled_sens.cnecs[Setup.SHC]
    cp = select_hours(bundled_capacity[Setup.SHC], ORACLE_HOURS)
    rows = [bundled_d2.hours.index(h) for h in ORACLE_HOURS]
    ntc = grid.series.ntc[np.asarray(ORACLE_HOURS) - 1]
    ex = np.clip(bundled_d2.exchange[rows], -ntc, ntc)
    pinned = {b: (ex[:, k], ex[:, k]) for k, b in enumerate(grid.border_ids)}

    shc_rams = cp.ram[Setup.SHC]
    d1_shc = solve_d1_shc(grid, cnecs, shc_rams, ORACLE_HOURS, config, ex_bounds=pinned)

    # the AHC constraint sees the UAF explicitly, so it gets it back as capacity
    s = uaf_sensitivity(cnecs, grid, build_gsk(grid, Setup.SHC))
    fuaf = ex @ s.T
    np.testing.assert_allclose(fuaf, cp.fuaf, atol=1e-6)
    pos, neg = shc_rams.pos + fuaf, shc_rams.neg + fuaf
    ahc_rams = RamSet(pos, neg, np.zeros_like(pos), np.zeros_like(pos), pos, neg)
    d1_ahc = solve_d1_ahc(grid, cnecs, ahc_rams, ORACLE_HOURS, config, vbz_bounds=pinned)

    np.testing.assert_allclose(d1_ahc.objective, d1_shc.objective, rtol=1e-6, atol=1e-6)
    np.testing.assert_allclose(d1_ahc.exchange, d1_shc.exchange, atol=1e-6)


def test_audits_hold(bundled_study):
    for setup, run in bundled_study.runs.items():
        for stage in ("d2", "d1", "d0"):
            for family, residual in run.audits[stage].items():
                assert residual <= 1e-6, (setup, stage, family)


def test_d0_security(bundled_study):
    lc = bundled_study.sens.lc
    for run in bundled_study.runs.values():
        assert (np.abs(run.d0.flows) <= lc.fmax - lc.frm + 1e-6).all()


def test_ahc_is_cheaper(bundled_study):
    shc, ahc = (bundled_study.runs[s].costs for s in (Setup.SHC, Setup.AHC))
    assert ahc.fb_cost <= shc.fb_cost * (1 + 1e-9)
    assert ahc.total_cost <= shc.total_cost * (1 + 1e-9)
    assert all(bundled_study.checks.values())


def test_summary_is_deterministic(tmp_path, bundled_grid, bundled_config):
    config = replace(bundled_config, hours=ORACLE_HOURS, domain_hours=(12,))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        for name in ("a", "b"):
            write_report(run_paired_study(bundled_grid, config), tmp_path / name)
    first = (tmp_path / "a" / "summary.json").read_bytes()
    assert first == (tmp_path / "b" / "summary.json").read_bytes()
    assert json.loads(first)["config"]["hours"] == list(ORACLE_HOURS)
