import numpy as np
import pytest

from fbmc_sim.domains import domain_projection, halfplanes, polygon_from_halfplanes

# columns NP1, NP2, NP3; NP2 = -a and NP3 = -b
SQUARE_PTDF = np.array([[0.0, -1.0, 0.0], [0.0, 0.0, -1.0]])


def test_square_domain():
    polygon = domain_projection(SQUARE_PTDF, np.array([100.0, 50.0]), np.array([-100.0, -50.0]))
    assert polygon.feasible and polygon.bounded
    corners = {tuple(v) for v in np.round(polygon.vertices, 6)}
    assert corners == {(100.0, 50.0), (100.0, -50.0), (-100.0, 50.0), (-100.0, -50.0)}
    assert polygon.contains([[0.0, 0.0]]).all()
    assert not polygon.contains([[101.0, 0.0]]).any()


def test_vertices_counter_clockwise():
    polygon = domain_projection(SQUARE_PTDF, np.array([1.0, 1.0]), np.array([-1.0, -1.0]))
    v = polygon.vertices
    area = 0.5 * np.sum(v[:, 0] * np.roll(v[:, 1], -1) - np.roll(v[:, 0], -1) * v[:, 1])
    assert area == pytest.approx(4.0)


def test_single_constraint_is_unbounded_strip():
    polygon = domain_projection(np.array([[1.0, 0.0, 0.0]]), np.array([10.0]), np.array([-10.0]))
    assert polygon.feasible
    assert not polygon.bounded
    assert len(polygon.vertices) == 0


def test_contradictory_rams_are_empty():
    polygon = domain_projection(SQUARE_PTDF, np.array([-5.0, 1.0]), np.array([5.0, -1.0]))
    assert not polygon.feasible
    assert polygon.frame().empty


def test_fixed_vbz_positions_shift_the_domain():
    ptdf = np.hstack([SQUARE_PTDF, np.array([[0.5], [0.0]])])
    A, rhs = halfplanes(ptdf, np.array([100.0, 50.0]), np.array([-100.0, -50.0]), np.array([40.0]))
    np.testing.assert_allclose(rhs, [80.0, 50.0, 120.0, 50.0])
    polygon = polygon_from_halfplanes(A, rhs)
    assert polygon.vertices[:, 0].max() == pytest.approx(80.0)


def test_needs_three_zones():
    with pytest.raises(ValueError):
        halfplanes(np.zeros((2, 2)), np.ones(2), -np.ones(2))
    with pytest.raises(ValueError):
        halfplanes(np.zeros((2, 4)), np.ones(2), -np.ones(2), np.zeros(3))
