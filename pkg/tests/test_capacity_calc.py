import numpy as np
import pytest

from fbmc_sim.capacity_calc import (D2Reference, adjustment_for_minram, amr_invariance_check,
                                    compute_rams, minram_check, select_hours, zero_balance_flows)
from fbmc_sim.config import Setup
from fbmc_sim.sensitivity import ZonalPtdf


def test_amr_zero_with_slack_capacity():
    amr_pos, amr_neg = adjustment_for_minram(np.array([0.0]), 1000.0, 100.0, 0.7)
    assert amr_pos[0] == 0.0
    assert amr_neg[0] == 0.0


def test_amr_positive_example():
    amr_pos, _ = adjustment_for_minram(np.array([250.0]), 1000.0, 100.0, 0.7)
    assert amr_pos[0] == pytest.approx(50.0)


def test_zero_trade_keeps_reference_flows():
    f_ref = np.array([[120.0, -40.0]])
    ref = D2Reference((1,), f_ref, np.zeros((1, 3)), np.zeros((1, 1)), np.zeros((1, 3)))
    pz = ZonalPtdf(np.array([[0.2, -0.1, 0.0], [0.3, 0.1, -0.2]]), ("a", "b"), ("Z1", "Z2", "Z3"))
    f0_fb, f0_all, fuaf = zero_balance_flows(ref, pz, np.array([[0.4], [0.1]]))
    np.testing.assert_array_equal(f0_fb, f_ref)
    np.testing.assert_array_equal(f0_all, f_ref)
    assert not fuaf.any()


def test_single_border_export_gives_uaf():
    """E MW over the border into zone 2: fuaf = E * (border PTDF - zone 2 PTDF)."""
    export = 100.0
    pz = np.array([[0.2, -0.1, 0.0]])
    pb = np.array([[0.35]])
    share = np.array([[0.0, 1.0, 0.0]])
    np_fb = export * share
    ref = D2Reference((1,), np.array([[80.0]]), np_fb, np.array([[export]]), np_fb - export * share)
    _, _, fuaf = zero_balance_flows(ref, ZonalPtdf(pz, ("a",), ("Z1", "Z2", "Z3")), pb)
    assert fuaf[0, 0] == pytest.approx(export * (0.35 - (-0.1)))


def test_zero_balance_dimension_mismatch():
    ref = D2Reference((1,), np.zeros((1, 2)), np.zeros((1, 3)), np.zeros((1, 1)), np.zeros((1, 3)))
    with pytest.raises(ValueError):
        zero_balance_flows(ref, ZonalPtdf(np.zeros((3, 3)), ("a", "b", "c"), ("x", "y", "z")),
                           np.zeros((2, 1)))


@pytest.fixture
def random_capacity():
    rng = np.random.default_rng(11)
    fmax = rng.uniform(500.0, 2000.0, 40)
    frm = 0.05 * fmax
    f0_all = rng.normal(0.0, 0.4, (12, 40)) * fmax
    fuaf = rng.normal(0.0, 0.3, (12, 40)) * fmax
    cp = compute_rams(f0_all + fuaf, f0_all, fmax, frm, hours=range(1, 13),
                      cnec_ids=[f"c{i}" for i in range(40)])
    return cp, fmax


def test_ram_difference_is_uaf(random_capacity):
    cp, _ = random_capacity
    report = amr_invariance_check(cp)
    assert report["amr_max_abs_diff"] == 0.0
    assert report["ram_identity_residual"] < 1e-9
    assert not report["fuaf_zero"]


def test_minram_and_floor_hold(random_capacity):
    cp, fmax = random_capacity
    table = minram_check(cp, fmax)
    assert (table["violations"] == 0).all()
    for ram in cp.ram.values():
        assert (ram.pos >= 0.2 * fmax - 1e-6).all()
        assert (ram.neg <= -0.2 * fmax + 1e-6).all()


def test_floor_binds_on_large_uaf():
    cp = compute_rams(np.array([[900.0]]), np.array([[0.0]]), np.array([1000.0]), np.array([0.0]),
                      hours=(1,), cnec_ids=("c",))
    shc = cp.ram[Setup.SHC]
    assert shc.raw_pos[0, 0] == pytest.approx(100.0)
    assert shc.pos[0, 0] == pytest.approx(200.0)
    assert cp.ram[Setup.AHC].pos[0, 0] == pytest.approx(1000.0)


def test_ahc_minram_uses_ram_alone():
    cp = compute_rams(np.array([[900.0]]), np.array([[0.0]]), np.array([1000.0]), np.array([0.0]),
                      hours=(1,), cnec_ids=("c",))
    ahc = cp.ram[Setup.AHC]
    # RAM + fuaf on the negative side would sit at -100, far inside -700
    assert ahc.neg[0, 0] + cp.fuaf[0, 0] == pytest.approx(-100.0)
    table = minram_check(cp, np.array([1000.0])).set_index(["setup", "rule"])
    assert table.loc[("ahc", "minram_neg"), "violations"] == 0
    assert table.loc[("ahc", "minram_neg"), "worst_margin"] == pytest.approx(300.0)
    assert table.loc[("shc", "minram_pos"), "worst_margin"] == pytest.approx(400.0)


def test_zero_uaf_gives_identical_rams():
    f0 = np.array([[100.0, -300.0], [0.0, 700.0]])
    cp = compute_rams(f0, f0, np.array([1000.0, 1000.0]), np.array([50.0, 50.0]),
                      hours=(1, 2), cnec_ids=("a", "b"))
    report = amr_invariance_check(cp)
    assert report["fuaf_zero"]
    assert report["final_rams_identical"]


def test_compute_rams_rejects_bad_factors():
    with pytest.raises(ValueError):
        compute_rams(np.zeros((1, 1)), np.zeros((1, 1)), [1.0], [0.0], minram_factor=0.2, core_floor=0.3)


def test_select_hours(random_capacity):
    cp, _ = random_capacity
    sub = select_hours(cp, [3, 1])
    assert sub.hours == (3, 1)
    np.testing.assert_array_equal(sub.fuaf[1], cp.fuaf[0])
    np.testing.assert_array_equal(sub.ram[Setup.AHC].pos[0], cp.ram[Setup.AHC].pos[2])
    with pytest.raises(ValueError):
        select_hours(cp, [99])
