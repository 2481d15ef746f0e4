#!/usr/bin/env python3
"""
quadrature.py - Quadrature rules on the reference triangle

The reference triangle has vertices (0,0), (1,0), (0,1) and area 1/2. Rules are
conical products of Gauss-Legendre and Gauss-Jacobi(1,0) points; subdivided
rules and a point-singular split (Duffy collapse) build on them.
"""

import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy.special import roots_jacobi

from .errors import QuadratureError

MAX_ORDER = 20


@dataclass(frozen=True)
class QuadratureRule:
    """Rule on the reference triangle: barycentric nodes and weights summing to 1/2."""
    order: int
    barycentric: np.ndarray
    weights: np.ndarray

    @property
    def points(self) -> np.ndarray:
        """Reference coordinates (xi, eta) of the nodes, shape (n, 2)."""
        return self.barycentric[:, 1:]

    @property
    def size(self) -> int:
        return len(self.weights)

    def integrate_reference(self, func) -> float:
        """Apply the rule to func(xi, eta) on the reference triangle."""
        xi, eta = self.points[:, 0], self.points[:, 1]
        return float(np.sum(self.weights * func(xi, eta)))


def gauss_legendre(n: int, a: float = 0.0, b: float = 1.0) -> Tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on [a, b]."""
    x, w = np.polynomial.legendre.leggauss(n)
    half = 0.5 * (b - a)
    return a + half * (x + 1.0), half * w


def _points_for_order(order: int) -> int:
    return int(math.ceil((order + 1) / 2.0))


def cell_quadrature(order: int) -> QuadratureRule:
    """
    Conical-product rule exact for polynomials of total degree <= order.

    Args:
        order (int): polynomial degree, 1..MAX_ORDER

    Returns:
        QuadratureRule: nodes in barycentric coordinates, weights summing to 1/2

    Raises:
        QuadratureError: if order is outside the supported range
    """
    if not isinstance(order, (int, np.integer)) or order < 1 or order > MAX_ORDER:
        raise QuadratureError(f"Unsupported quadrature order {order}; supported range is 1..{MAX_ORDER}")

    n = _points_for_order(int(order))
    a, wa = np.polynomial.legendre.leggauss(n)
    b, wb = roots_jacobi(n, 1.0, 0.0)

    aa, bb = np.meshgrid(a, b, indexing="ij")
    wwa, wwb = np.meshgrid(wa, wb, indexing="ij")
    xi = (1.0 + aa) * (1.0 - bb) / 4.0
    eta = (1.0 + bb) / 2.0
    weights = (wwa * wwb / 8.0).ravel()

    xi, eta = xi.ravel(), eta.ravel()
    barycentric = np.column_stack([1.0 - xi - eta, xi, eta])
    return QuadratureRule(order=int(order), barycentric=barycentric, weights=weights)


def _split_reference(triangles: np.ndarray) -> np.ndarray:
    """Midpoint refinement of reference-coordinate triangles, shape (m,3,2) -> (4m,3,2)."""
    a, b, c = triangles[:, 0], triangles[:, 1], triangles[:, 2]
    ab, bc, ca = 0.5 * (a + b), 0.5 * (b + c), 0.5 * (c + a)
    children = [
        np.stack([a, ab, ca], axis=1),
        np.stack([ab, b, bc], axis=1),
        np.stack([ca, bc, c], axis=1),
        np.stack([bc, ca, ab], axis=1),
    ]
    return np.concatenate(children, axis=0)


def subdivided_rule(rule: QuadratureRule, levels: int) -> QuadratureRule:
    """
    Composite rule on 4**levels congruent sub-triangles of the reference triangle.

    Args:
        rule: base rule applied on every sub-triangle
        levels: number of midpoint refinements (0 returns the rule unchanged)
    """
    if levels < 0:
        raise QuadratureError(f"Subdivision levels must be >= 0, got {levels}")
    if levels == 0:
        return rule

    pieces = np.array([[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]])
    for _ in range(levels):
        pieces = _split_reference(pieces)

    ref = rule.points
    p0 = pieces[:, 0][:, None, :]
    e1 = (pieces[:, 1] - pieces[:, 0])[:, None, :]
    e2 = (pieces[:, 2] - pieces[:, 0])[:, None, :]
    pts = p0 + ref[None, :, 0:1] * e1 + ref[None, :, 1:2] * e2
    pts = pts.reshape(-1, 2)
    weights = np.tile(rule.weights, len(pieces)) / len(pieces)

    barycentric = np.column_stack([1.0 - pts[:, 0] - pts[:, 1], pts[:, 0], pts[:, 1]])
    return QuadratureRule(order=rule.order, barycentric=barycentric, weights=weights)


def map_rule(rule: QuadratureRule, triangles: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Map a reference rule onto physical triangles.

    Args:
        rule: reference rule
        triangles: vertex coordinates, shape (m, 3, 2)

    Returns:
        points (m, n, 2) and weights (m, n) including the 2*area Jacobian
    """
    triangles = np.asarray(triangles, dtype=float)
    points = np.einsum("nk,mkd->mnd", rule.barycentric, triangles)
    e1 = triangles[:, 1] - triangles[:, 0]
    e2 = triangles[:, 2] - triangles[:, 0]
    jac = np.abs(e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
    return points, jac[:, None] * rule.weights[None, :]


def duffy_rule(triangle: np.ndarray, point: np.ndarray, order: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Rule for integrands with a 1/R singularity at an in-plane point.

    The triangle is split into three pieces sharing the point as a vertex and
    each piece is collapsed from the unit square, so the Jacobian cancels the
    singularity. Signed piece areas make the rule valid for points outside the
    triangle as well.

    Args:
        triangle: vertices, shape (3, 2), counter-clockwise
        point: singular point, shape (2,)
        order: Gauss-Legendre degree per direction

    Returns:
        points (m, 2) and weights (m,)
    """
    if order < 1 or order > 4 * MAX_ORDER:
        raise QuadratureError(f"Unsupported Duffy order {order}")
    triangle = np.asarray(triangle, dtype=float)
    point = np.asarray(point, dtype=float)
    u, wu = gauss_legendre(_points_for_order(order))
    uu, vv = np.meshgrid(u, u, indexing="ij")
    wuu, wvv = np.meshgrid(wu, wu, indexing="ij")
    uu, vv, base_w = uu.ravel(), vv.ravel(), (wuu * wvv).ravel()

    all_points, all_weights = [], []
    for i in range(3):
        a = triangle[i]
        b = triangle[(i + 1) % 3]
        pa, ab = a - point, b - a
        det = pa[0] * ab[1] - pa[1] * ab[0]
        if det == 0.0:
            continue
        pts = point[None, :] + uu[:, None] * (pa[None, :] + vv[:, None] * ab[None, :])
        all_points.append(pts)
        all_weights.append(base_w * uu * det)

    if not all_points:
        return np.zeros((0, 2)), np.zeros(0)
    return np.concatenate(all_points), np.concatenate(all_weights)
