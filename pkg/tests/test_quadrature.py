#!/usr/bin/env python3
"""
test_quadrature.py - Triangle rules, subdivision and singular (Duffy) rules
"""

import math

import numpy as np
import pytest

from aperture.errors import QuadratureError
from aperture.potentials import plane_moments
from aperture.quadrature import MAX_ORDER, cell_quadrature, duffy_rule, gauss_legendre, map_rule, subdivided_rule


def monomial_integral(a: int, b: int) -> float:
    """int_T x^a y^b over the reference triangle."""
    return math.factorial(a) * math.factorial(b) / math.factorial(a + b + 2)


class TestCellQuadrature:
    """Conical-product rules on the reference triangle"""

    @pytest.mark.parametrize("order", range(1, MAX_ORDER + 1))
    def test_weights_sum_to_reference_area(self, order):
        rule = cell_quadrature(order)
        assert np.sum(rule.weights) == pytest.approx(0.5, rel=1e-13)
        assert np.all(rule.weights > 0)
        assert np.allclose(rule.barycentric.sum(axis=1), 1.0)

    @pytest.mark.parametrize("order", [1, 2, 4, 7, 10])
    def test_exact_for_polynomials_up_to_order(self, order):
        rule = cell_quadrature(order)
        for a in range(order + 1):
            for b in range(order + 1 - a):
                value = rule.integrate_reference(lambda x, y: x ** a * y ** b)
                assert value == pytest.approx(monomial_integral(a, b), rel=1e-12, abs=1e-15)

    @pytest.mark.parametrize("order", [0, MAX_ORDER + 1, -3])
    def test_order_out_of_range(self, order):
        with pytest.raises(QuadratureError):
            cell_quadrature(order)

    def test_gauss_legendre_interval(self):
        x, w = gauss_legendre(5, 1.0, 3.0)
        assert np.sum(w) == pytest.approx(2.0)
        assert np.sum(w * x ** 9) == pytest.approx((3.0 ** 10 - 1.0) / 10.0)


class TestSubdividedRule:
    """Composite rules used for touching cell pairs"""

    def setup_method(self):
        self.base = cell_quadrature(4)

    def test_levels_zero_is_identity(self):
        assert subdivided_rule(self.base, 0) is self.base

    def test_composite_rule_keeps_exactness(self):
        rule = subdivided_rule(self.base, 2)
        assert rule.size == 16 * self.base.size
        assert np.sum(rule.weights) == pytest.approx(0.5)
        assert rule.integrate_reference(lambda x, y: x ** 2 * y ** 2) == pytest.approx(monomial_integral(2, 2))

    def test_negative_levels(self):
        with pytest.raises(QuadratureError):
            subdivided_rule(self.base, -1)


class TestMapRule:
    """Reference rules mapped onto physical cells"""

    def test_weights_sum_to_cell_areas(self, unit_disc):
        points, weights = map_rule(cell_quadrature(3), unit_disc.triangles)
        assert points.shape == (unit_disc.n_cells, cell_quadrature(3).size, 2)
        assert np.allclose(weights.sum(axis=1), unit_disc.areas)

    def test_linear_moment_gives_centroid(self, unit_disc):
        points, weights = map_rule(cell_quadrature(1), unit_disc.triangles)
        moments = np.einsum("cq,cqd->cd", weights, points) / unit_disc.areas[:, None]
        assert np.allclose(moments, unit_disc.centroids)


class TestDuffyRule:
    """Singular rules against the closed-form static potential"""

    def setup_method(self):
        self.triangle = np.array([[0.0, 0.0], [1.0, 0.2], [0.3, 0.9]])

    @pytest.mark.parametrize("point", [[0.4, 0.35], [0.5, 0.2], [1.3, 1.0]])
    def test_inverse_distance_integral(self, point):
        point = np.array(point)
        nodes, weights = duffy_rule(self.triangle, point, 12)
        numeric = np.sum(weights / np.linalg.norm(nodes - point, axis=1))
        exact = plane_moments(self.triangle, point[None, :])[0][0]
        assert numeric == pytest.approx(exact, rel=1e-6)

    def test_weights_sum_to_area(self):
        _, weights = duffy_rule(self.triangle, np.array([0.4, 0.35]), 6)
        (x1, y1), (x2, y2) = self.triangle[1] - self.triangle[0], self.triangle[2] - self.triangle[0]
        area = 0.5 * abs(x1 * y2 - y1 * x2)
        assert np.sum(weights) == pytest.approx(area)

    def test_invalid_order(self):
        with pytest.raises(QuadratureError):
            duffy_rule(self.triangle, np.array([0.4, 0.35]), 0)
