#!/usr/bin/env python3
"""
test_greens.py - Free-space and half-space Green's functions
"""

import math

import numpy as np
import pytest

from aperture.errors import SingularityError
from aperture.greens import (curl_columns, dyadic_G, dyadic_G2_minus, dyadic_G2_plus, g_free, grad_g, hessian_g,
                             reflect)


class TestScalarKernel:
    """g = exp(ikR)/(4 pi R) and its derivatives"""

    def setup_method(self):
        self.k = 1.7
        self.r = np.array([0.3, -0.4, 0.8])
        self.source = np.array([-0.2, 0.5, 0.1])

    def test_value(self):
        big_r = np.linalg.norm(self.r - self.source)
        expected = np.exp(1j * self.k * big_r) / (4.0 * math.pi * big_r)
        assert g_free(self.r, self.source, self.k) == pytest.approx(expected, rel=1e-14)

    def test_coincident_points_rejected(self):
        with pytest.raises(SingularityError):
            g_free(self.r, self.r, self.k)

    def test_gradient_matches_finite_differences(self):
        step = 1e-6
        fd = np.array([(g_free(self.r + step * e, self.source, self.k)
                        - g_free(self.r - step * e, self.source, self.k)) / (2.0 * step) for e in np.eye(3)])
        assert np.allclose(grad_g(self.r, self.source, self.k), fd, rtol=1e-7, atol=1e-10)

    def test_hessian_is_symmetric_with_helmholtz_trace(self):
        hess = hessian_g(self.r, self.source, self.k)
        assert np.allclose(hess, hess.T)
        laplacian = np.trace(hess)
        assert laplacian == pytest.approx(-self.k ** 2 * g_free(self.r, self.source, self.k), rel=1e-12)

    def test_separation_floor_scales_with_diameter(self):
        origin = np.zeros(3)
        close = np.array([5e-9, 0.0, 0.0])
        with pytest.raises(SingularityError):
            g_free(origin, close, self.k)
        assert np.isfinite(g_free(origin, close, self.k, diameter=0.1))
        with pytest.raises(SingularityError):
            g_free(origin, np.array([5e-7, 0.0, 0.0]), self.k, diameter=100.0)
        with pytest.raises(SingularityError):
            g_free(self.r, self.source, self.k, diameter=0.0)

    def test_hessian_matches_finite_differences_at_random_pairs(self):
        rng = np.random.default_rng(0)
        r = rng.uniform(-1.0, 1.0, (400, 3))
        source = rng.uniform(-1.0, 1.0, (400, 3))
        keep = np.linalg.norm(r - source, axis=1) > 0.2
        r, source = r[keep][:100], source[keep][:100]
        assert len(r) == 100
        step = 1e-5
        fd = np.stack([(grad_g(r + step * e, source, self.k) - grad_g(r - step * e, source, self.k)) / (2.0 * step)
                       for e in np.eye(3)], axis=-1)
        hess = hessian_g(r, source, self.k)
        scale = np.max(np.abs(hess), axis=(1, 2))[:, None, None]
        assert np.all(np.abs(hess - fd) <= 1e-6 * scale)

    def test_broadcasts_over_points(self):
        points = np.array([[0.0, 0.0, 1.0], [0.0, 0.0, 2.0], [1.0, 0.0, 0.0]])
        values = g_free(points, np.zeros(3), self.k)
        assert values.shape == (3,)
        assert grad_g(points, np.zeros(3), self.k).shape == (3, 3)
        assert hessian_g(points, np.zeros(3), self.k).shape == (3, 3, 3)


class TestDyadics:
    """Free and half-space dyadic Green's functions"""

    def setup_method(self):
        self.k = 2.0
        self.source = np.array([0.1, -0.4, 0.0])

    def test_requires_positive_wavenumber(self):
        with pytest.raises(SingularityError):
            dyadic_G(np.array([0.0, 0.0, 1.0]), self.source, 0.0)

    def test_curl_of_free_dyadic(self):
        r = np.array([0.5, 0.3, 0.9])
        curl = curl_columns(lambda x: dyadic_G(x, self.source, self.k), r)
        grad = grad_g(r, self.source, self.k)
        expected = np.column_stack([np.cross(grad, e) for e in np.eye(3)])
        assert np.allclose(curl, expected, rtol=1e-6, atol=1e-9)

    def test_upper_dyadic_has_no_normal_row_on_plane(self):
        r = np.array([0.6, 0.2, 0.0])
        dyadic = dyadic_G2_plus(r, self.source, self.k)
        assert np.max(np.abs(dyadic[2])) < 1e-14
        assert np.max(np.abs(dyadic[:2])) > 0

    def test_upper_dyadic_curl_is_normal_on_plane(self):
        r = np.array([0.6, 0.2, 0.0])
        curl = curl_columns(lambda x: dyadic_G2_plus(x, self.source, self.k), r)
        assert np.max(np.abs(curl[:2])) < 1e-8
        assert np.max(np.abs(curl[2])) > 1e-3

    def test_lower_dyadic_is_mirror_of_upper(self):
        r = np.array([0.4, -0.1, -0.7])
        assert np.allclose(dyadic_G2_minus(r, self.source, self.k), dyadic_G2_plus(reflect(r), self.source, self.k))

    def test_reflect(self):
        assert reflect(np.array([1.0, 2.0, 3.0])).tolist() == [1.0, 2.0, -3.0]

    def test_free_dyadic_is_symmetric_and_reciprocal(self):
        r = np.array([0.5, 0.3, 0.9])
        dyadic = dyadic_G(r, self.source, self.k)
        assert np.allclose(dyadic, dyadic.T, rtol=1e-14, atol=0)
        assert np.allclose(dyadic, dyadic_G(self.source, r, self.k), rtol=1e-14, atol=0)

    def test_free_dyadic_far_field_is_transverse_projector(self):
        direction = np.array([0.48, -0.6, 0.64])
        distance = 5000.0
        dyadic = dyadic_G(distance * direction, np.zeros(3), self.k)
        scaled = dyadic * 4.0 * math.pi * distance * np.exp(-1j * self.k * distance)
        projector = np.eye(3) - np.outer(direction, direction)
        assert np.allclose(scaled, projector, atol=1e-3)
        assert np.max(np.abs(scaled @ direction)) < 1e-3

    @pytest.mark.parametrize("dyadic, r", [
        (dyadic_G2_plus, [0.5, 0.3, 0.9]),
        (dyadic_G2_minus, [0.4, -0.1, -0.7]),
    ])
    def test_half_space_dyadics_solve_helmholtz(self, dyadic, r):
        r = np.asarray(r)
        step = 1e-3
        center = dyadic(r, self.source, self.k)
        laplacian = sum(dyadic(r + step * e, self.source, self.k) + dyadic(r - step * e, self.source, self.k)
                        for e in np.eye(3)) - 6.0 * center
        laplacian /= step ** 2
        residual = laplacian + self.k ** 2 * center
        assert np.max(np.abs(residual)) < 1e-3 * self.k ** 2 * np.max(np.abs(center))
