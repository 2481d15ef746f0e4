#!/usr/bin/env python3
"""
potentials.py - Semi-analytic triangle potentials

Integrals of 1/R, R and their first moments over a flat triangle, for targets in
the triangle's plane or above it. Every area integral is reduced to line
integrals along the three edges, so the 1/R singularity is integrated exactly;
the smooth remainder of the Helmholtz kernel is left to Gauss quadrature.

Notation per edge e (counter-clockwise, from a_e to b_e): unit tangent t_e,
outward normal n_e, signed distance d_e = (a_e - x).n_e, arc coordinates
s- = (a_e - x).t_e and s+ = s- + l_e, and R0^2 = d_e^2 + z^2.
"""

import math
from typing import Optional, Tuple

import numpy as np

from .errors import SingularityError
from .quadrature import cell_quadrature, map_rule
from .spectra import locate_points

FOUR_PI = 4.0 * math.pi
_SERIES_CUTOFF = 0.5
_SERIES_TERMS = 12


def edge_frames(triangle: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Start points, unit tangents, outward normals and lengths of the three edges."""
    triangle = np.asarray(triangle, dtype=float)
    a = triangle
    vec = np.roll(triangle, -1, axis=0) - triangle
    length = np.linalg.norm(vec, axis=1)
    t = vec / length[:, None]
    n = np.column_stack([t[:, 1], -t[:, 0]])
    return a, t, n, length


def _log_s_plus_r(s: np.ndarray, big_r: np.ndarray, c: np.ndarray) -> np.ndarray:
    """log(s + R) with R = sqrt(s^2 + c), stable for negative s."""
    with np.errstate(divide="ignore", invalid="ignore"):
        pos = np.log(np.where(s >= 0, s + big_r, 1.0))
        neg = np.log(np.where(s < 0, c, 1.0) / np.where(s < 0, big_r - s, 1.0))
    return np.where(s >= 0, pos, neg)


def _edge_terms(triangle: np.ndarray, x: np.ndarray, z: Optional[np.ndarray] = None):
    a, t, n, length = edge_frames(triangle)
    rel = a[None, :, :] - x[:, None, :]
    s_minus = np.einsum("med,ed->me", rel, t)
    s_plus = s_minus + length[None, :]
    d = np.einsum("med,ed->me", rel, n)
    z2 = 0.0 if z is None else (np.asarray(z, dtype=float) ** 2)[:, None]
    c = d ** 2 + z2
    r_minus = np.sqrt(s_minus ** 2 + c)
    r_plus = np.sqrt(s_plus ** 2 + c)
    return t, n, d, c, s_minus, s_plus, r_minus, r_plus


def _inverse_line(c, s_minus, s_plus, r_minus, r_plus) -> np.ndarray:
    """Integral of 1/R along each edge."""
    f = _log_s_plus_r(s_plus, r_plus, c) - _log_s_plus_r(s_minus, r_minus, c)
    with np.errstate(divide="ignore", invalid="ignore"):
        collinear = np.where(s_minus > 0, np.log(s_plus / np.where(s_minus > 0, s_minus, 1.0)),
                             np.where(s_plus < 0, np.log(s_minus / np.where(s_plus < 0, s_plus, 1.0)), np.inf))
    return np.where(c == 0.0, collinear, f)


def _masked(coeff: np.ndarray, values: np.ndarray) -> np.ndarray:
    """coeff * values with exact zeros where coeff vanishes."""
    return np.where(coeff == 0.0, 0.0, coeff * np.where(coeff == 0.0, 0.0, values))


def _r_line(c, s_minus, s_plus, r_minus, r_plus) -> np.ndarray:
    """Integral of R along each edge: [s R + c log(s + R)] / 2."""
    def prim(s, big_r):
        return 0.5 * (s * big_r + _masked(c, _log_s_plus_r(s, big_r, c)))
    return prim(s_plus, r_plus) - prim(s_minus, r_minus)


def _r3_line(c, s_minus, s_plus, r_minus, r_plus) -> np.ndarray:
    """Integral of R^3 along each edge."""
    def prim(s, big_r):
        return (0.25 * s * big_r ** 3 + 0.375 * c * s * big_r
                + 0.375 * _masked(c ** 2, _log_s_plus_r(s, big_r, c)))
    return prim(s_plus, r_plus) - prim(s_minus, r_minus)


def plane_moments(triangle: np.ndarray, x: np.ndarray):
    """
    Static potentials of a triangle at in-plane targets.

    Args:
        triangle: counter-clockwise vertices (3, 2)
        x: targets (m, 2), not on the triangle's edges

    Returns:
        int 1/R (m,), int (x'-x)/R (m, 2), int R (m,), int (x'-x) R (m, 2)
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    t, n, d, c, sm, sp_, rm, rp = _edge_terms(triangle, x)
    f0 = _inverse_line(c, sm, sp_, rm, rp)
    f1 = _r_line(c, sm, sp_, rm, rp)
    f3 = _r3_line(c, sm, sp_, rm, rp)

    inv_r = np.sum(_masked(d, f0), axis=1)
    inv_r_vec = f1 @ n
    r_scalar = np.sum(d * f1, axis=1) / 3.0
    r_vec = (f3 @ n) / 3.0
    return inv_r, inv_r_vec, r_scalar, r_vec


def solid_angle(triangle: np.ndarray, x: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Solid angle (>= 0) subtended by the triangle at (x, z); the z -> 0 limit for z = 0."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    z = np.asarray(z, dtype=float)
    t, n, d, c, sm, sp_, rm, rp = _edge_terms(triangle, x, z)
    az = np.abs(z)[:, None]
    omega = np.arctan2(d * sp_, c + az * rp) - np.arctan2(d * sm, c + az * rm)
    return np.sum(omega, axis=1)


def space_moments(triangle: np.ndarray, x: np.ndarray, z: np.ndarray, side: Optional[np.ndarray] = None):
    """
    Static potentials of a triangle at targets (x, z) in space.

    On-plane targets (z = 0) take the one-sided limit given by side (+1 above,
    -1 below) for the normal derivative.

    Returns:
        int 1/R (m,), int (x'-x)/R (m, 2), grad_r int 1/R (m, 3),
        int grad_r(1/R) x (x'-x, 0) (m, 3)
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    z = np.asarray(z, dtype=float)
    t, n, d, c, sm, sp_, rm, rp = _edge_terms(triangle, x, z)
    az = np.abs(z)[:, None]
    f0 = _inverse_line(c, sm, sp_, rm, rp)
    f1 = _r_line(c, sm, sp_, rm, rp)
    omega = np.sum(np.arctan2(d * sp_, c + az * rp) - np.arctan2(d * sm, c + az * rm), axis=1)

    sign = np.sign(z)
    if side is not None:
        sign = np.where(z == 0.0, side, sign)
    elif np.any(z == 0.0):
        raise SingularityError("On-plane target needs a side (+1 upper, -1 lower)")

    inv_r = np.sum(_masked(d, f0), axis=1) - np.abs(z) * omega
    inv_r_vec = f1 @ n
    u_vec = -(f0 @ n)
    grad = np.column_stack([u_vec, -sign * omega])
    cross = np.column_stack([z * u_vec[:, 1], -z * u_vec[:, 0], np.zeros(len(z))])
    return inv_r, inv_r_vec, grad, cross


def smooth_remainder(big_r: np.ndarray, k: float) -> np.ndarray:
    """exp(ikR)/(4piR) minus its expansion 1/(4piR) + ik/(4pi) - k^2 R/(8pi)."""
    big_r = np.asarray(big_r, dtype=float)
    kr = k * big_r
    small = kr < _SERIES_CUTOFF
    series = np.zeros_like(big_r, dtype=complex)
    term = (1j * k) ** 3 * big_r ** 2 / 6.0
    for n in range(3, 3 + _SERIES_TERMS):
        series += term
        term = term * (1j * k) * big_r / (n + 1)
    r_safe = np.where(small, 1.0, big_r)
    direct = (np.exp(1j * kr) - 1.0 - 1j * kr + 0.5 * kr ** 2) / r_safe
    return np.where(small, series, direct) / FOUR_PI


def helmholtz_tail(big_r: np.ndarray, k: float) -> Tuple[np.ndarray, np.ndarray]:
    """h = (exp(ikR) - 1)/(4 pi R) and dh/dR, both regular at R = 0."""
    big_r = np.asarray(big_r, dtype=float)
    kr = k * big_r
    small = kr < _SERIES_CUTOFF
    h_series = np.zeros_like(big_r, dtype=complex)
    dh_series = np.zeros_like(big_r, dtype=complex)
    factorial = 1.0
    for n in range(1, 1 + _SERIES_TERMS):
        factorial *= n
        coeff = (1j * k) ** n / factorial
        h_series += coeff * big_r ** (n - 1)
        if n >= 2:
            dh_series += coeff * (n - 1) * big_r ** (n - 2)
    r_safe = np.where(small, 1.0, big_r)
    e = np.exp(1j * kr)
    h_direct = (e - 1.0) / r_safe
    dh_direct = (1j * kr * e - e + 1.0) / r_safe ** 2
    return np.where(small, h_series, h_direct) / FOUR_PI, np.where(small, dh_series, dh_direct) / FOUR_PI


def plane_kernel(triangle: np.ndarray, area: float, centroid: np.ndarray, x: np.ndarray, k: float,
                 inner_points: np.ndarray, inner_weights: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    K0 = int g(x, x') dx' and K1 = int g(x, x') (x' - x) dx' over a triangle, in-plane targets.

    The singular and the two next terms of the kernel expansion are integrated
    in closed form; the smooth remainder by the given inner rule.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    inv_r, inv_r_vec, r_scalar, r_vec = plane_moments(triangle, x)
    k0 = inv_r / FOUR_PI + 0j
    k1 = inv_r_vec / FOUR_PI + 0j
    if k != 0.0:
        k0 = k0 + 1j * k * area / FOUR_PI - k ** 2 * r_scalar / (2.0 * FOUR_PI)
        k1 = k1 + (1j * k * area / FOUR_PI) * (centroid[None, :] - x) - k ** 2 * r_vec / (2.0 * FOUR_PI)
        delta = inner_points[None, :, :] - x[:, None, :]
        rem = smooth_remainder(np.linalg.norm(delta, axis=-1), k) * inner_weights[None, :]
        k0 = k0 + rem.sum(axis=1)
        k1 = k1 + np.einsum("mq,mqd->md", rem, delta)
    return k0, k1


def plane_kernel_quadrature(x: np.ndarray, k: float, inner_points: np.ndarray,
                            inner_weights: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """K0, K1 by plain quadrature, for well-separated targets."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    delta = inner_points[None, :, :] - x[:, None, :]
    big_r = np.linalg.norm(delta, axis=-1)
    g = np.exp(1j * k * big_r) / (FOUR_PI * big_r) * inner_weights[None, :]
    return g.sum(axis=1), np.einsum("mq,mqd->md", g, delta)


def space_kernel(triangle: np.ndarray, x: np.ndarray, z: np.ndarray, k: float,
                 inner_points: np.ndarray, inner_weights: np.ndarray, analytic: bool = True,
                 side: Optional[np.ndarray] = None):
    """
    Helmholtz potentials of a triangle at targets (x, z).

    Returns:
        P0 = int g (m,), P1 = int g (x'-x) (m, 2), G0 = grad_r int g (m, 3),
        Q = int grad_r g x (x'-x, 0) (m, 3)
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    z = np.asarray(z, dtype=float)
    m = len(x)
    delta = inner_points[None, :, :] - x[:, None, :]
    big_r = np.sqrt(np.sum(delta ** 2, axis=-1) + z[:, None] ** 2)
    # r - r' = (-delta, z)
    r_minus = np.concatenate([-delta, np.broadcast_to(z[:, None, None], (m, len(inner_weights), 1))], axis=-1)
    planar = np.concatenate([delta, np.zeros((m, len(inner_weights), 1))], axis=-1)

    if analytic:
        inv_r, inv_r_vec, grad, cross = space_moments(triangle, x, z, side)
        p0 = inv_r / FOUR_PI + 0j
        p1 = inv_r_vec / FOUR_PI + 0j
        g0 = grad / FOUR_PI + 0j
        q = cross / FOUR_PI + 0j
        h, dh = helmholtz_tail(big_r, k)
        w = inner_weights[None, :]
        p0 = p0 + np.sum(h * w, axis=1)
        p1 = p1 + np.einsum("mq,mqd->md", h * w, delta)
        r_safe = np.where(big_r > 0, big_r, 1.0)
        grad_h = (dh * w / r_safe)[..., None] * r_minus
        g0 = g0 + grad_h.sum(axis=1)
        q = q + np.cross(grad_h, planar).sum(axis=1)
        return p0, p1, g0, q

    if np.any(big_r == 0.0):
        raise SingularityError("Quadrature node coincides with a field point")
    g = np.exp(1j * k * big_r) / (FOUR_PI * big_r)
    w = inner_weights[None, :]
    grad_g = (g * (1j * k - 1.0 / big_r) / big_r * w)[..., None] * r_minus
    return (np.sum(g * w, axis=1), np.einsum("mq,mqd->md", g * w, delta),
            grad_g.sum(axis=1), np.cross(grad_g, planar).sum(axis=1))


def segment_distance(points: np.ndarray, starts: np.ndarray, ends: np.ndarray) -> np.ndarray:
    """Distance from each point (m, 2) to the nearest of the segments [starts, ends] (s, 2)."""
    d = ends - starts
    length2 = np.maximum(np.sum(d ** 2, axis=1), 1e-300)
    rel = points[:, None, :] - starts[None, :, :]
    t = np.clip(np.einsum("msd,sd->ms", rel, d) / length2[None, :], 0.0, 1.0)
    foot = starts[None, :, :] + t[..., None] * d[None, :, :]
    return np.min(np.linalg.norm(points[:, None, :] - foot, axis=-1), axis=1)


class TargetSweep:
    """
    Cell-by-cell Helmholtz potentials of a mesh at a fixed set of targets.

    Targets closer to a cell than close_factor cell diameters get the
    semi-analytic potentials; the rest get a plain Gauss rule. Targets within
    exclusion * h_max of the aperture are refused unless they lie exactly on
    the plane and carry a side.
    """

    def __init__(self, mesh, x: np.ndarray, z: np.ndarray, side: Optional[np.ndarray] = None,
                 near_order: int = 6, far_order: int = 4, close_factor: float = 3.0,
                 exclusion: float = 0.1):
        self.mesh = mesh
        self.x = np.atleast_2d(np.asarray(x, dtype=float))
        self.z = np.asarray(z, dtype=float).reshape(-1)
        if side is not None:
            side = np.broadcast_to(np.asarray(side, dtype=float), self.z.shape).copy()
        self.side = side

        on_plane = self.z == 0.0
        if np.any(on_plane) and (side is None or np.any(side[on_plane] == 0.0)):
            raise SingularityError("On-plane targets need a side (+1 upper, -1 lower)")
        cells, _ = locate_points(mesh, self.x)
        boundary = mesh.edges[mesh.boundary_edge_mask]
        planar = np.where(cells >= 0, 0.0, segment_distance(self.x, mesh.vertices[boundary[:, 0]],
                                                            mesh.vertices[boundary[:, 1]]))
        distance = np.sqrt(planar ** 2 + self.z ** 2)
        limit = exclusion * mesh.h_max
        refused = (distance < limit) & ~on_plane
        if np.any(refused):
            raise SingularityError(f"{int(refused.sum())} target(s) within {limit:.3g} of the aperture; "
                                   f"near-field evaluation refused")

        self.near_points, self.near_weights = map_rule(cell_quadrature(near_order), mesh.triangles)
        self.far_points, self.far_weights = map_rule(cell_quadrature(far_order), mesh.triangles)
        centroids = mesh.centroids
        gap = np.sqrt(np.sum((self.x[:, None, :] - centroids[None, :, :]) ** 2, axis=-1) + self.z[:, None] ** 2)
        self.close = gap < close_factor * mesh.diameters[None, :]

    @property
    def n_targets(self) -> int:
        return len(self.z)

    def cell(self, c: int, k: float):
        """P0 (m,), P1 (m, 2), G0 (m, 3), Q (m, 3) of cell c at all targets."""
        m = self.n_targets
        p0 = np.zeros(m, dtype=complex)
        p1 = np.zeros((m, 2), dtype=complex)
        g0 = np.zeros((m, 3), dtype=complex)
        q = np.zeros((m, 3), dtype=complex)
        close = self.close[:, c]
        tri = self.mesh.triangles[c]
        for mask, analytic in ((close, True), (~close, False)):
            if not np.any(mask):
                continue
            points = self.near_points[c] if analytic else self.far_points[c]
            weights = self.near_weights[c] if analytic else self.far_weights[c]
            side = self.side[mask] if self.side is not None else None
            values = space_kernel(tri, self.x[mask], self.z[mask], k, points, weights,
                                  analytic=analytic, side=side)
            p0[mask], p1[mask], g0[mask], q[mask] = values
        return p0, p1, g0, q
