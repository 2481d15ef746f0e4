#!/usr/bin/env python3
"""
test_potentials.py - Closed-form static potentials and Helmholtz kernels of a triangle
"""

import math

import numpy as np
import pytest

from aperture.errors import SingularityError
from aperture.potentials import (TargetSweep, helmholtz_tail, plane_moments, segment_distance, smooth_remainder,
                                 solid_angle, space_kernel, space_moments)
from aperture.quadrature import cell_quadrature, map_rule, subdivided_rule


def fine_rule(triangle: np.ndarray, levels: int = 3):
    points, weights = map_rule(subdivided_rule(cell_quadrature(10), levels), triangle[None])
    return points[0], weights[0]


class TestStaticMoments:
    """Closed-form integrals of 1/R and R over a triangle"""

    def setup_method(self):
        self.triangle = np.array([[0.0, 0.0], [1.0, 0.1], [0.2, 0.8]])
        self.points, self.weights = fine_rule(self.triangle)

    def test_plane_moments_off_triangle(self):
        x = np.array([[1.5, 1.2], [-0.6, 0.3]])
        inv_r, inv_r_vec, r_scalar, r_vec = plane_moments(self.triangle, x)
        for i, target in enumerate(x):
            delta = self.points - target
            dist = np.linalg.norm(delta, axis=1)
            assert inv_r[i] == pytest.approx(np.sum(self.weights / dist), rel=1e-10)
            assert np.allclose(inv_r_vec[i], (self.weights / dist) @ delta, rtol=1e-10)
            assert r_scalar[i] == pytest.approx(np.sum(self.weights * dist), rel=1e-10)
            assert np.allclose(r_vec[i], (self.weights * dist) @ delta, rtol=1e-10)

    def test_space_moments_reduce_to_plane_moments(self):
        x = np.array([[1.5, 1.2]])
        plane = plane_moments(self.triangle, x)
        space = space_moments(self.triangle, x, np.array([0.0]), side=np.array([1.0]))
        assert space[0][0] == pytest.approx(plane[0][0], rel=1e-12)
        assert np.allclose(space[1], plane[1])

    def test_space_moments_off_plane(self):
        x = np.array([[0.3, 0.3]])
        z = np.array([0.4])
        inv_r, _, grad, _ = space_moments(self.triangle, x, z)
        delta = np.column_stack([self.points - x[0], np.full(len(self.points), -z[0])])
        dist = np.linalg.norm(delta, axis=1)
        assert inv_r[0] == pytest.approx(np.sum(self.weights / dist), rel=1e-8)
        # grad_r (1/R) = -(r - r')/R^3 = delta / R^3
        assert np.allclose(grad[0], (self.weights / dist ** 3) @ delta, rtol=1e-6)

    def test_normal_derivative_jump_inside(self):
        x = np.array([[0.3, 0.3]])
        _, _, upper, _ = space_moments(self.triangle, x, np.array([0.0]), side=np.array([1.0]))
        _, _, lower, _ = space_moments(self.triangle, x, np.array([0.0]), side=np.array([-1.0]))
        assert upper[0, 2] == pytest.approx(-2.0 * math.pi)
        assert lower[0, 2] == pytest.approx(2.0 * math.pi)

    def test_normal_derivative_vanishes_outside(self):
        x = np.array([[1.5, 1.2]])
        _, _, grad, _ = space_moments(self.triangle, x, np.array([0.0]), side=np.array([1.0]))
        assert abs(grad[0, 2]) < 1e-12

    def test_on_plane_needs_side(self):
        with pytest.raises(SingularityError):
            space_moments(self.triangle, np.array([[0.3, 0.3]]), np.array([0.0]))

    def test_solid_angle(self):
        inside = solid_angle(self.triangle, np.array([[0.3, 0.3]]), np.array([1e-12]))
        far = solid_angle(self.triangle, np.array([[0.3, 0.3]]), np.array([1e6]))
        assert inside[0] == pytest.approx(2.0 * math.pi, rel=1e-9)
        assert far[0] < 1e-9


class TestHelmholtzSplits:
    """Regularized pieces of the Helmholtz kernel"""

    @pytest.mark.parametrize("kr", [0.05, 0.3, 0.49, 0.51, 2.0, 7.0])
    def test_smooth_remainder(self, kr):
        k = 1.3
        big_r = np.array([kr / k])
        direct = (np.exp(1j * kr) - 1.0 - 1j * kr + 0.5 * kr ** 2) / big_r / (4.0 * math.pi)
        assert smooth_remainder(big_r, k)[0] == pytest.approx(direct[0], rel=1e-9, abs=1e-15)

    @pytest.mark.parametrize("kr", [0.1, 0.49, 0.51, 3.0])
    def test_helmholtz_tail(self, kr):
        k = 2.0
        big_r = kr / k
        h, dh = helmholtz_tail(np.array([big_r]), k)
        assert h[0] == pytest.approx((np.exp(1j * kr) - 1.0) / (4.0 * math.pi * big_r), rel=1e-10)
        step = 1e-6
        upper = helmholtz_tail(np.array([big_r + step]), k)[0]
        lower = helmholtz_tail(np.array([big_r - step]), k)[0]
        fd = (upper - lower) / (2.0 * step)
        assert dh[0] == pytest.approx(fd[0], rel=1e-6)

    def test_tail_is_regular_at_zero(self):
        h, dh = helmholtz_tail(np.array([0.0]), 1.5)
        assert h[0] == pytest.approx(1j * 1.5 / (4.0 * math.pi))
        assert dh[0] == pytest.approx(-1.5 ** 2 / (8.0 * math.pi))


class TestSpaceKernel:
    """Semi-analytic and plain-quadrature Helmholtz potentials agree"""

    def setup_method(self):
        self.triangle = np.array([[0.0, 0.0], [0.6, 0.1], [0.2, 0.5]])
        self.points, self.weights = fine_rule(self.triangle)
        self.k = 2.5

    @pytest.mark.parametrize("z", [0.3, -0.3, 1.5])
    def test_analytic_matches_quadrature(self, z):
        x = np.array([[0.25, 0.2], [1.0, -0.4]])
        zz = np.full(2, z)
        analytic = space_kernel(self.triangle, x, zz, self.k, self.points, self.weights, analytic=True)
        plain = space_kernel(self.triangle, x, zz, self.k, self.points, self.weights, analytic=False)
        for a, b in zip(analytic, plain):
            assert np.allclose(a, b, rtol=1e-6, atol=1e-9)

    def test_quadrature_rejects_node_hits(self):
        with pytest.raises(SingularityError):
            space_kernel(self.triangle, self.points[:1], np.zeros(1), self.k, self.points, self.weights,
                         analytic=False)


class TestTargetSweep:
    """Cell sweeps over a mesh at fixed targets"""

    def test_refuses_targets_just_above_the_aperture(self, unit_disc):
        with pytest.raises(SingularityError):
            TargetSweep(unit_disc, np.array([[0.1, 0.1]]), np.array([1e-3 * unit_disc.h_max]))

    def test_on_plane_targets_need_side(self, unit_disc):
        with pytest.raises(SingularityError):
            TargetSweep(unit_disc, np.array([[0.1, 0.1]]), np.array([0.0]))
        sweep = TargetSweep(unit_disc, np.array([[0.1, 0.1]]), np.array([0.0]), side=np.array([-1.0]))
        assert sweep.n_targets == 1

    def test_cell_potentials_sum_to_mesh_integral(self, unit_disc):
        sweep = TargetSweep(unit_disc, np.array([[0.0, 0.0]]), np.array([3.0]), close_factor=100.0)
        total = sum(sweep.cell(c, 0.0)[0][0] for c in range(unit_disc.n_cells))
        points, weights = map_rule(cell_quadrature(10), unit_disc.triangles)
        dist = np.sqrt(np.sum(points ** 2, axis=-1) + 9.0)
        assert total.real == pytest.approx(np.sum(weights / dist) / (4.0 * math.pi), rel=1e-7)

    def test_segment_distance(self):
        points = np.array([[0.5, 1.0], [2.0, 0.0]])
        d = segment_distance(points, np.array([[0.0, 0.0]]), np.array([[1.0, 0.0]]))
        assert np.allclose(d, [1.0, 1.0])
