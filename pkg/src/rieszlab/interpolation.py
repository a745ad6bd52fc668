"""Exponent-diagram geometry and bilinear interpolation bookkeeping.

Working in reciprocal coordinates ``(1/p, 1/q)``, uniform-in-shear bounds
for the bilinear operator live on the open square with corners
``(alpha/d, alpha/d)`` and ``(1, 1)``; dropping uniformity enlarges the
region to the open pentagon with vertices ``(0, alpha/d)``, ``(0, 1)``,
``(1, 1)``, ``(1, 0)``, ``(alpha/d, 0)``.  Strong-type constants at interior
points are assembled from restricted weak-type constants at three square
vertices via convex (barycentric) combination of reciprocals.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "ReciprocalPoint",
    "RegionLabel",
    "classify_region",
    "vertex_triples",
    "barycentric_solve",
    "triangulate_square",
    "interpolated_constant",
    "strong_type_constant",
]

_TOL = 1e-12


@dataclass(frozen=True)
class ReciprocalPoint:
    """Point ``(1/p, 1/q, 1/r)`` of the exponent diagram."""

    inv_p: float
    inv_q: float
    inv_r: float

    def scaling_defect(self, alpha: float, dim: int) -> float:
        return self.inv_p + self.inv_q - self.inv_r - alpha / dim

    def scaling_consistent(self, alpha: float, dim: int) -> bool:
        return abs(self.scaling_defect(alpha, dim)) <= _TOL


class RegionLabel(enum.Enum):
    INTERIOR_SQUARE = "interior_square"
    INTERIOR_PENTAGON_ONLY = "interior_pentagon_only"
    BOUNDARY_SQUARE = "boundary_square"
    OUTSIDE = "outside"


def classify_region(inv_p: float, inv_q: float, alpha: float, dim: int) -> RegionLabel:
    """Place ``(1/p, 1/q)`` in the boundedness diagram.

    Priority: square boundary, then open square (uniform bounds), then the
    rest of the open pentagon (non-uniform bounds), then outside.  Every
    point receives exactly one label; comparisons use a 1e-12 tolerance.
    """
    s = alpha / dim
    x, y = inv_p, inv_q
    in_closed_square = (s - _TOL <= x <= 1.0 + _TOL) and (s - _TOL <= y <= 1.0 + _TOL)
    on_square_boundary = in_closed_square and (
        abs(x - s) <= _TOL or abs(x - 1.0) <= _TOL or abs(y - s) <= _TOL or abs(y - 1.0) <= _TOL
    )
    if on_square_boundary:
        return RegionLabel.BOUNDARY_SQUARE
    if in_closed_square:
        return RegionLabel.INTERIOR_SQUARE
    in_open_pentagon = (
        x > _TOL and y > _TOL and x < 1.0 - _TOL and y < 1.0 - _TOL and x + y > s + _TOL
    )
    if in_open_pentagon:
        return RegionLabel.INTERIOR_PENTAGON_ONLY
    return RegionLabel.OUTSIDE


def vertex_triples(alpha: float, dim: int) -> tuple[ReciprocalPoint, ...]:
    """The four square-corner exponent triples, in fixed order.

    Corner ``(p, q)`` values are ``(1, 1)``, ``(1, d/alpha)``,
    ``(d/alpha, 1)`` and ``(d/alpha, d/alpha)``; each ``1/r`` is derived
    from the scaling relation, so the triples are consistent to round-off.
    """
    if not 0.0 < alpha < dim:
        raise ValueError("alpha must lie in (0, dim)")
    s = alpha / dim

    def point(inv_p, inv_q):
        return ReciprocalPoint(inv_p, inv_q, inv_p + inv_q - s)

    return (point(1.0, 1.0), point(1.0, s), point(s, 1.0), point(s, s))


def barycentric_solve(
    target: ReciprocalPoint,
    v1: ReciprocalPoint,
    v2: ReciprocalPoint,
    v3: ReciprocalPoint,
) -> tuple[float, float, float]:
    """Weights expressing ``target`` as a convex combination of three vertices.

    The solve acts in the ``(1/p, 1/q)`` plane; weights must land strictly
    inside ``(0, 1)``.  Collinear vertices or a target outside the open
    triangle are rejected.
    """
    mat = np.array(
        [
            [v1.inv_p, v2.inv_p, v3.inv_p],
            [v1.inv_q, v2.inv_q, v3.inv_q],
            [1.0, 1.0, 1.0],
        ]
    )
    det = np.linalg.det(mat)
    scale = max(abs(v.inv_p) + abs(v.inv_q) for v in (v1, v2, v3))
    if abs(det) <= 1e-12 * max(scale, 1.0) ** 2:
        raise ValueError("vertices are collinear")
    thetas = np.linalg.solve(mat, np.array([target.inv_p, target.inv_q, 1.0]))
    if thetas.min() <= _TOL or thetas.max() >= 1.0 - _TOL:
        label = classify_region(target.inv_p, target.inv_q, 1.0, 2)  # geometric info only
        raise ValueError(
            f"target ({target.inv_p}, {target.inv_q}) is not strictly inside the triangle "
            f"(weights {thetas.tolist()}, diagram label {label.value})"
        )
    return float(thetas[0]), float(thetas[1]), float(thetas[2])


def combine(thetas, points: tuple[ReciprocalPoint, ...]) -> ReciprocalPoint:
    """Convex combination of reciprocal triples (affine in all coordinates)."""
    inv_p = sum(t * v.inv_p for t, v in zip(thetas, points))
    inv_q = sum(t * v.inv_q for t, v in zip(thetas, points))
    inv_r = sum(t * v.inv_r for t, v in zip(thetas, points))
    return ReciprocalPoint(inv_p, inv_q, inv_r)


@dataclass(frozen=True)
class SquareTriangulation:
    """Split of the exponent square along its main diagonal."""

    triangles: tuple[tuple[ReciprocalPoint, ReciprocalPoint, ReciprocalPoint], ...]

    def select(self, inv_p: float, inv_q: float) -> int:
        """Index of the triangle containing the point; diagonal ties go to
        the first triangle by construction."""
        for idx, tri in enumerate(self.triangles):
            if _contains(tri, inv_p, inv_q):
                return idx
        raise ValueError(f"point ({inv_p}, {inv_q}) lies outside the square")


def _contains(tri, x, y) -> bool:
    mat = np.array(
        [
            [tri[0].inv_p, tri[1].inv_p, tri[2].inv_p],
            [tri[0].inv_q, tri[1].inv_q, tri[2].inv_q],
            [1.0, 1.0, 1.0],
        ]
    )
    thetas = np.linalg.solve(mat, np.array([x, y, 1.0]))
    return bool(thetas.min() >= -_TOL)


def triangulate_square(vertices: tuple[ReciprocalPoint, ...]) -> SquareTriangulation:
    """Split the four corner triples into two triangles along the
    ``(1,1)``-``(alpha/d, alpha/d)`` diagonal, in a fixed deterministic order."""
    v1, v2, v3, v4 = vertices
    return SquareTriangulation(triangles=((v1, v2, v4), (v1, v3, v4)))


def interpolated_constant(c1: float, c2: float, c3: float, thetas, structural_factor: float = 1.0) -> float:
    """Geometric interpolation ``c1^t1 c2^t2 c3^t3`` of vertex constants.

    ``structural_factor`` stands in for the exponent-dependent factor the
    interpolation machinery contributes on top of the vertex constants; it
    is configuration, not a derived quantity, and defaults to 1.
    """
    if min(c1, c2, c3) <= 0:
        raise ValueError("vertex constants must be positive")
    t1, t2, t3 = thetas
    return structural_factor * c1**t1 * c2**t2 * c3**t3


def strong_type_constant(
    inv_p: float,
    inv_q: float,
    alpha: float,
    dim: int,
    vertex_constants: tuple[float, float, float, float],
    structural_factor: float = 1.0,
) -> tuple[float, dict]:
    """Interpolated strong-type constant at an interior square point.

    Chooses the first vertex triangle (in a fixed candidate order) that
    strictly contains the target; points on the main diagonal are handled
    by the all-corner candidate list.  Returns the constant and a report
    of the solve (vertices used, weights, induced 1/r, side condition).
    """
    if classify_region(inv_p, inv_q, alpha, dim) is not RegionLabel.INTERIOR_SQUARE:
        raise ValueError(
            f"({inv_p}, {inv_q}) is not interior to the uniform-bounds square: "
            f"{classify_region(inv_p, inv_q, alpha, dim).value}"
        )
    verts = vertex_triples(alpha, dim)
    candidates = ((0, 1, 2), (0, 1, 3), (0, 2, 3), (1, 2, 3))
    target = ReciprocalPoint(inv_p, inv_q, inv_p + inv_q - alpha / dim)
    for idx in candidates:
        tri = tuple(verts[i] for i in idx)
        try:
            thetas = barycentric_solve(target, *tri)
        except ValueError:
            continue
        cs = tuple(vertex_constants[i] for i in idx)
        value = interpolated_constant(*cs, thetas, structural_factor)
        induced = combine(thetas, tri)
        report = {
            "vertices": idx,
            "thetas": thetas,
            "induced_inv_r": induced.inv_r,
            "side_condition_ok": induced.inv_r <= sum(v.inv_r for v in tri) + _TOL,
            "structural_factor": structural_factor,
        }
        return value, report
    raise ValueError(f"no vertex triangle strictly contains ({inv_p}, {inv_q})")
