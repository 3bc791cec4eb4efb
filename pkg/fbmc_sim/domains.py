"""
Flow-based domains projected onto the exchange plane of three FB zones.

With three physical FB zones and the net positions summing to zero, trade is
two-dimensional. Axes: a = EX 1->2, b = EX 1->3, so that
NP1 = a + b, NP2 = -a, NP3 = -b. Every CNEC gives two halfplanes
A [a, b]^T <= rhs; the domain polygon is found by intersecting all constraint
lines pairwise and keeping the points inside every halfplane.
"""

import math
from dataclasses import dataclass

import numpy as np
import pandas as pd

from . import lp_core

ABS_TOL = 1e-6
PARALLEL_TOL = 1e-12
# NP of the three FB zones per unit of (a, b)
AXES = np.array([[1.0, 1.0], [-1.0, 0.0], [0.0, -1.0]])


@dataclass(frozen=True, eq=False)
class DomainPolygon:
    vertices: np.ndarray  # k x 2, counter-clockwise
    A: np.ndarray
    rhs: np.ndarray
    bounded: bool
    feasible: bool

    def contains(self, points, abs_tol=ABS_TOL):
        points = np.atleast_2d(points)
        return np.all(points @ self.A.T <= self.rhs + abs_tol, axis=1)

    def frame(self):
        return pd.DataFrame(self.vertices, columns=["ex_12", "ex_13"])


def halfplanes(ptdf_z, ram_pos, ram_neg, fixed_positions=None):
    """
    Halfplane form of the FB constraints in the (a, b) plane.

    Args:
        ptdf_z (np.ndarray): CNEC x zone PTDF; the first three columns are the
            physical FB zones, any further columns are zones held fixed.
        ram_pos (np.ndarray): Positive RAM per CNEC.
        ram_neg (np.ndarray): Negative RAM per CNEC.
        fixed_positions (np.ndarray): Net positions of the extra columns
            (VBZs); zeros when omitted.

    Returns:
        tuple: (A, rhs) with A of shape (2 * CNECs, 2).
    """
    ptdf_z = np.asarray(ptdf_z, dtype=float)
    if ptdf_z.ndim != 2 or ptdf_z.shape[1] < 3:
        raise ValueError("domain projection needs exactly three physical FB zones")
    extra = ptdf_z.shape[1] - 3
    fixed = np.zeros(extra) if fixed_positions is None else np.asarray(fixed_positions, dtype=float)
    if fixed.shape != (extra,):
        raise ValueError(f"expected {extra} fixed net positions, got {fixed.shape}")

    coef = ptdf_z[:, :3] @ AXES
    offset = ptdf_z[:, 3:] @ fixed if extra else np.zeros(ptdf_z.shape[0])
    A = np.vstack([coef, -coef])
    rhs = np.concatenate([np.asarray(ram_pos) - offset, -(np.asarray(ram_neg) - offset)])
    return A, rhs


def _is_bounded(A, rhs):
    """LP probe in all four axis directions; also tells whether the set is empty."""
    model = lp_core.LpModel(name="domain")
    a = model.add_variable("a", -math.inf, math.inf)
    b = model.add_variable("b", -math.inf, math.inf)
    for i, (row, r) in enumerate(zip(A, rhs)):
        model.add_constraint(f"c{i}", {a: row[0], b: row[1]}, "<=", r)
    bounded = True
    for var, sign in ((a, 1.0), (a, -1.0), (b, 1.0), (b, -1.0)):
        probe = model.scaled(0.0)
        probe.set_cost(var, sign)
        status = lp_core.solve(probe).status
        if status == lp_core.LpStatus.INFEASIBLE:
            return False, False
        if status != lp_core.LpStatus.OPTIMAL:
            bounded = False
    return bounded, True


def _order_ccw(points):
    if len(points) < 3:
        return points
    center = points.mean(axis=0)
    angle = np.arctan2(points[:, 1] - center[1], points[:, 0] - center[0])
    return points[np.argsort(angle, kind="stable")]


def polygon_from_halfplanes(A, rhs, abs_tol=ABS_TOL):
    """Vertices of {x : A x <= rhs} in the plane."""
    A = np.asarray(A, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    trivial = np.all(np.abs(A) < PARALLEL_TOL, axis=1)
    if np.any(trivial & (rhs < -abs_tol)):
        return DomainPolygon(np.zeros((0, 2)), A, rhs, True, False)
    A, rhs = A[~trivial], rhs[~trivial]

    bounded, feasible = _is_bounded(A, rhs)
    if not feasible:
        return DomainPolygon(np.zeros((0, 2)), A, rhs, True, False)

    points = []
    n = len(A)
    for i in range(n):
        for j in range(i + 1, n):
            det = A[i, 0] * A[j, 1] - A[i, 1] * A[j, 0]
            if abs(det) < PARALLEL_TOL:
                continue
            x = np.linalg.solve(A[[i, j]], rhs[[i, j]])
            if np.all(A @ x <= rhs + abs_tol):
                points.append(x)
    if points:
        # snap duplicates from lines meeting in one corner
        unique = np.unique(np.round(np.array(points), 6), axis=0)
    else:
        unique = np.zeros((0, 2))
    return DomainPolygon(_order_ccw(unique), A, rhs, bounded, True)


def domain_projection(ptdf_z, ram_pos, ram_neg, fixed_positions=None):
    """
    FB domain of one hour in (EX 1->2, EX 1->3) coordinates.

    Returns:
        DomainPolygon: Empty vertex list when the domain is empty; ``bounded``
        is False for open domains.
    """
    A, rhs = halfplanes(ptdf_z, ram_pos, ram_neg, fixed_positions)
    return polygon_from_halfplanes(A, rhs)
