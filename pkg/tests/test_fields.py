#!/usr/bin/env python3
"""
test_fields.py - Scattered fields, far field, transmitted power and residuals
"""

import numpy as np
import pytest

from aperture.errors import ConfigError, SingularityError
from aperture.fields import (CSV_HEADER, FieldEvaluator, FieldSample, SamplePlan, aperture_flux_pointwise,
                             export_field_map, map_points, residual_suite, silver_mueller, transmission)
from aperture.geometry import ApertureSpec, build_mesh
from aperture.vector_bie import VectorDensity, solve_direct


@pytest.fixture(scope="module")
def evaluator(disc_solution):
    return FieldEvaluator(disc_solution)


class TestFieldSample:
    """Region tags must match the side of the screen"""

    def test_region_mismatch(self):
        with pytest.raises(ConfigError):
            FieldSample(position=np.array([0.0, 0.0, 1.0]), E=np.zeros(3), H=np.zeros(3), region="lower")

    def test_samples_are_tagged(self, evaluator):
        samples = evaluator.samples(np.array([[0.0, 0.0, 1.0], [0.0, 0.0, -1.0]]))
        assert [s.region for s in samples] == ["upper", "lower"]


class TestNearField:
    """Potential-based field evaluation"""

    def test_on_plane_needs_side(self, evaluator):
        with pytest.raises(SingularityError):
            evaluator.evaluate(np.array([[0.1, 0.1, 0.0]]))

    def test_mirror_symmetry(self, evaluator):
        above = evaluator.eval_Hs(np.array([[0.3, -0.2, 0.8]]))[0]
        below = evaluator.eval_Hs(np.array([[0.3, -0.2, -0.8]]))[0]
        assert np.allclose(above[:2], -below[:2], rtol=1e-8, atol=1e-14)
        assert above[2] == pytest.approx(below[2], rel=1e-8)

    @pytest.mark.parametrize("z", [3.0, -3.0])
    def test_agrees_with_dyadic_quadrature(self, evaluator, z):
        points = np.array([[0.2, 0.1, z], [1.5, -1.0, z]])
        direct = evaluator.eval_Hs(points)
        dyadic = evaluator.eval_Hs_dyadic(points)
        assert np.linalg.norm(direct - dyadic) < 1e-3 * np.linalg.norm(dyadic)

    def test_dyadic_route_refuses_near_points(self, evaluator):
        with pytest.raises(SingularityError):
            evaluator.eval_Hs_dyadic(np.array([[0.0, 0.0, 0.1]]))

    def test_zero_density_radiates_nothing(self, unit_disc, disc_dofs):
        silent = FieldEvaluator(VectorDensity(mesh=unit_disc, dofs=disc_dofs, k=1.0,
                                              coefficients=np.zeros(disc_dofs.n_vector)))
        points = np.array([[0.2, 0.1, 0.5], [1.5, -1.0, -2.0]])
        assert np.all(silent.eval_Hs(points) == 0)
        assert np.all(silent.eval_Es(points) == 0)

    def test_field_accessors_split_evaluate(self, evaluator):
        points = np.array([[0.2, 0.1, 0.5], [0.4, -0.3, -0.6]])
        e_s, h_s = evaluator.evaluate(points)
        assert np.array_equal(evaluator.eval_Es(points), e_s)
        assert np.array_equal(evaluator.eval_Hs(points), h_s)


class TestFarField:
    """Far-field amplitude in the lower half-space"""

    def test_transverse(self, evaluator):
        directions = np.array([[0.0, 0.0, -1.0], [0.6, 0.0, -0.8], [0.0, -0.28, -0.96]])
        values = evaluator.far_field(directions)
        radial = np.abs(np.sum(values * directions, axis=1))
        assert np.all(radial < 1e-12 * np.max(np.abs(values)))

    @pytest.mark.parametrize("direction", [[0.0, 0.0, -2.0], [0.0, 0.0, 1.0], [1.0, 0.0, 0.0]])
    def test_invalid_directions(self, evaluator, direction):
        with pytest.raises(ConfigError):
            evaluator.far_field(np.array([direction]))

    def test_silver_mueller_decays(self, evaluator):
        values = silver_mueller(evaluator, [0.3, 0.2, -0.93], [25.0, 50.0, 100.0])
        assert values[0] > values[1] > values[2]

    def test_ray_must_point_down(self, evaluator):
        with pytest.raises(ConfigError):
            silver_mueller(evaluator, [0.0, 0.0, 1.0], [10.0])


class TestTransmission:
    """Aperture flux and far-field powers agree"""

    def test_powers_agree(self, disc_solution, disc_spatial, normal_wave, evaluator):
        report = transmission(disc_solution, normal_wave, disc_spatial.vector_matrix(normal_wave.k),
                              evaluator=evaluator)
        assert report.agree
        assert report.relative_difference < 0.02
        assert report.tau > 0
        assert report.incident_flux == pytest.approx(0.5 * disc_solution.mesh.total_area())
        assert report.to_dict()["warnings"] == []

    def test_aperture_power_is_pointwise_flux(self, disc_solution, normal_wave, evaluator):
        report = transmission(disc_solution, normal_wave, evaluator=evaluator)
        assert report.aperture_power == pytest.approx(aperture_flux_pointwise(evaluator))
        assert report.tau == pytest.approx(report.aperture_power / report.incident_flux)
        assert report.aperture_power_galerkin is None

    def test_galerkin_identity_is_reported_separately(self, disc_solution, disc_spatial, normal_wave, evaluator):
        report = transmission(disc_solution, normal_wave, disc_spatial.vector_matrix(normal_wave.k),
                              evaluator=evaluator)
        # the Galerkin identity and the far field are the same integral
        assert report.aperture_power_galerkin == pytest.approx(report.far_field_power, rel=1e-6)
        # the pointwise flux is computed independently from the near fields
        assert report.aperture_power != pytest.approx(report.aperture_power_galerkin, rel=1e-9)
        assert report.aperture_power == pytest.approx(report.aperture_power_galerkin, rel=0.02)

    def test_zero_amplitude(self, disc_solution, disc_spatial, normal_wave):
        with pytest.raises(ConfigError):
            transmission(disc_solution, normal_wave.scaled(0.0), disc_spatial.vector_matrix(normal_wave.k))


class TestResiduals:
    """Boundary and continuity residuals of the solved fields"""

    def test_screen_conditions_hold(self, disc_solution, normal_wave, evaluator):
        report = residual_suite(disc_solution, normal_wave, SamplePlan(n_aperture=4, n_screen=6),
                                evaluator=evaluator)
        residuals = report.extra["residuals"]
        assert residuals["screen_normal_H"] < 1e-8
        assert residuals["screen_tangential_E"] < 1e-8
        assert residuals["aperture_trace_E"] < 1e-6
        assert all(np.isfinite(value) for value in residuals.values())

    def test_aperture_continuity_decreases_under_refinement(self, normal_wave):
        values = []
        for h in (0.35, 0.25, 0.18):
            density = solve_direct(build_mesh(ApertureSpec.disc(1.0), h), normal_wave)
            values.append(residual_suite(density, normal_wave).extra["residuals"]["aperture_continuity_H"])
        assert values[0] > values[1] > values[2]
        assert values[2] < 0.2

    def test_unsupported_density(self, normal_wave):
        with pytest.raises(ConfigError):
            residual_suite(object(), normal_wave)


class TestFieldMaps:
    """CSV export of sampled fields"""

    def test_map_points(self):
        points = map_points(-1.0, 2.0, 5)
        assert points.shape == (25, 3)
        assert np.all(points[:, 2] == -1.0)
        assert points[:, 0].min() == -2.0 and points[:, 0].max() == 2.0

    def test_export(self, tmp_path, evaluator):
        points = map_points(-1.0, 1.0, 3)
        e_s, h_s = evaluator.evaluate(points)
        path = tmp_path / "map.csv"
        export_field_map(str(path), points, e_s, h_s)
        lines = path.read_text().splitlines()
        assert lines[0] == CSV_HEADER
        assert len(lines) == 10
        assert len(lines[1].split(",")) == 15
