#!/usr/bin/env python3
"""
test_spectra.py - Symbol, spectral grids, basis transforms and Cartesian Sobolev norms
"""

import math

import numpy as np
import pytest

from aperture.errors import ConfigError, SingularityError
from aperture.spectra import (FAR, INNER, NEAR, CartesianField, SpectralSettings, audit_branch, build_spectral_grid,
                              cartesian_div, cell_transforms, corrupted_branch, density_transform, forward_transform,
                              grid_from_settings, helmholtz_decompose, inverse_transform, low_frequency_bound,
                              multiplier_transforms, norm_grams, rasterize_cells, rasterize_edges, scalar_norm_gram,
                              sobolev_norm, sobolev_weight, spectral_distance, spectral_gram, symbol_g0, unit_frames,
                              vector_density_transform, weyl_check)


class TestSymbol:
    """Direct evaluation of the half-space symbol"""

    def test_propagating_branch(self):
        assert symbol_g0(np.array([0.0, 0.0]), 1.0) == pytest.approx(0.5j)
        assert symbol_g0(np.array([0.6, 0.0]), 1.0) == pytest.approx(1j / 1.6)

    def test_evanescent_branch(self):
        assert symbol_g0(np.array([2.0, 0.0]), 1.0) == pytest.approx(1.0 / (2.0 * math.sqrt(3.0)))
        assert symbol_g0(np.array([0.0, 3.0]), 0.0) == pytest.approx(1.0 / 6.0)

    def test_exclusion_band(self):
        with pytest.raises(SingularityError):
            symbol_g0(np.array([1.0, 0.0]), 1.0)
        with pytest.raises(SingularityError):
            symbol_g0(np.array([0.0, 0.0]), 0.0)

    def test_corrupted_branch_flips_evanescent_sign(self):
        with corrupted_branch():
            assert symbol_g0(np.array([2.0, 0.0]), 1.0).real < 0
        assert symbol_g0(np.array([2.0, 0.0]), 1.0).real > 0


class TestSpectralGrid:
    """Polar grids over the three radial regions"""

    def setup_method(self):
        self.grid = build_spectral_grid(1.0, 10.0, 8, 64)

    def test_regions_cover_the_disc(self):
        grid = self.grid
        assert np.all(grid.rho[grid.region == INNER] < 1.0)
        near = grid.rho[grid.region == NEAR]
        assert np.all((near > 1.0) & (near < 2.0))
        assert np.all(grid.rho[grid.region == FAR] > 2.0)
        assert np.max(grid.rho) < 10.0

    def test_weights_integrate_constants(self):
        total = sum(np.sum(chunk.weights) for chunk in self.grid.chunks())
        assert total == pytest.approx(100.0 * math.pi, rel=1e-12)
        assert sum(len(chunk.rho) for chunk in self.grid.chunks(1000)) == self.grid.size

    def test_gaussian_integral(self):
        value = self.grid.integrate(lambda chunk: np.exp(-chunk.rho ** 2))
        assert value.real == pytest.approx(math.pi, rel=1e-8)

    def test_region_restricted_integral(self):
        inner = self.grid.integrate(lambda chunk: np.ones_like(chunk.rho), region=INNER)
        assert inner.real == pytest.approx(math.pi, rel=1e-12)

    def test_branch_audit(self):
        assert audit_branch(self.grid)
        with corrupted_branch():
            assert not audit_branch(self.grid)
        assert audit_branch(self.grid)

    def test_static_grid_has_only_far_region(self):
        grid = build_spectral_grid(0.0, 5.0, 4, 16)
        assert np.all(grid.region == FAR)
        assert audit_branch(grid)

    @pytest.mark.parametrize("args", [
        (1.0, 2.0, 8, 16),
        (1.0, 10.0, 0, 16),
        (1.0, 10.0, 8, 0),
        (-1.0, 10.0, 8, 16),
    ])
    def test_invalid_parameters(self, args):
        with pytest.raises(ConfigError):
            build_spectral_grid(*args)

    def test_settings_choose_xi_max_from_mesh(self):
        settings = SpectralSettings(n_angular=16)
        assert settings.resolve_xi_max(1.0, 0.5) == pytest.approx(80.0)
        assert settings.resolve_xi_max(100.0, 0.5) == pytest.approx(250.0)
        grid = grid_from_settings(SpectralSettings(xi_max=12.0, chunk_size=128), 1.0, 0.5)
        assert grid.xi_max == 12.0
        assert grid.chunk_size == 128


class TestWeylIdentity:
    """Spectral reconstruction of the free-space kernel on the plane"""

    def setup_method(self):
        self.grid = build_spectral_grid(1.0, 300.0, 8, 16, panel_width=0.1)

    def test_reconstructs_kernel(self):
        value = weyl_check(np.array([0.0, 0.0]), np.array([2.0, 0.0]), 1.0, self.grid)
        expected = np.exp(2j) / (8.0 * math.pi)
        assert abs(value - expected) / abs(expected) < 1e-6

    def test_corrupted_branch_breaks_identity(self):
        expected = np.exp(2j) / (8.0 * math.pi)
        with corrupted_branch():
            value = weyl_check(np.array([0.0, 0.0]), np.array([2.0, 0.0]), 1.0, self.grid)
        assert abs(value - expected) / abs(expected) > 1e-3

    def test_coincident_points(self):
        with pytest.raises(SingularityError):
            weyl_check(np.array([0.5, 0.5]), np.array([0.5, 0.5]), 1.0, self.grid)


class TestBasisTransforms:
    """Closed-form transforms of cell indicators and RWG moments"""

    def setup_method(self):
        self.triangles = np.array([[[0.0, 0.0], [0.3, 0.05], [0.1, 0.25]]])
        self.xi = np.array([[3.0, 1.5], [-2.0, 3.0], [0.5, -4.0]])

    def test_closed_form_matches_quadrature(self):
        closed = cell_transforms(self.triangles, self.xi, fallback=0.0)
        quad = cell_transforms(self.triangles, self.xi, fallback=1e9)
        assert np.allclose(closed.chi, quad.chi, rtol=1e-8, atol=1e-12)
        assert np.allclose(closed.par, quad.par, rtol=1e-8, atol=1e-12)
        assert np.allclose(closed.perp, quad.perp, rtol=1e-8, atol=1e-12)

    def test_small_xi_tends_to_area(self, unit_disc):
        values = density_transform(unit_disc, np.ones(unit_disc.n_cells), np.array([[1e-9, 0.0]]))
        assert values[0] == pytest.approx(unit_disc.total_area(), rel=1e-9)

    def test_helmholtz_components_reconstruct(self):
        v_hat = np.array([[1.0 + 2.0j, -0.5j], [0.3, 0.7]])
        xi = np.array([[1.0, 2.0], [-3.0, 0.5]])
        parts = helmholtz_decompose(v_hat, xi)
        assert np.allclose(parts.reconstruct(xi), v_hat)

    def test_frames_undefined_at_origin(self):
        with pytest.raises(SingularityError):
            unit_frames(np.zeros((1, 2)))

    def test_curl_field_has_zero_mean(self, unit_disc, disc_dofs):
        # a discrete curl has zero normal trace and integrates to zero
        rng = np.random.default_rng(3)
        coefficients = disc_dofs.curl_matrix() @ rng.standard_normal(disc_dofs.n_multiplier)
        w_hat = vector_density_transform(unit_disc, disc_dofs, coefficients, np.zeros((1, 2)))
        assert np.max(np.abs(w_hat)) < 1e-12 * max(1.0, np.max(np.abs(coefficients)))


class TestSpectralGrams:
    """Sobolev Grams and distances assembled on a spectral grid"""

    def setup_method(self):
        self.grid = build_spectral_grid(1.0, 40.0, 6, 48)

    def test_scalar_gram_is_hermitian_positive(self, unit_disc):
        gram = scalar_norm_gram(unit_disc, self.grid, -0.5)
        assert np.allclose(gram, gram.conj().T)
        assert np.min(np.linalg.eigvalsh(gram)) > 0

    def test_distance_to_self_is_zero(self, unit_disc):
        def transform(xi):
            return density_transform(unit_disc, np.ones(unit_disc.n_cells), xi)
        assert spectral_distance(transform, transform, self.grid) == 0.0

    def test_one_pass_grams_match_separate_assembly(self, unit_disc, disc_dofs):
        h_gram, x_gram, mult = norm_grams(unit_disc, disc_dofs, self.grid, (0.5, -0.5))
        for s in (0.5, -0.5):
            expected = spectral_gram(self.grid, lambda chunk: [
                (multiplier_transforms(unit_disc, disc_dofs, chunk.xi), sobolev_weight(chunk.rho, s))])
            assert np.allclose(mult[s], expected, rtol=1e-10, atol=1e-12 * np.max(np.abs(expected)))
        h_only, x_only, none = norm_grams(unit_disc, disc_dofs, self.grid)
        assert none == {}
        assert np.allclose(h_only, h_gram) and np.allclose(x_only, x_gram)

    def test_norm_grams_are_ordered(self, unit_disc, disc_dofs):
        h_gram, x_gram, mult = norm_grams(unit_disc, disc_dofs, self.grid, (0.5, -0.5))
        assert np.min(np.linalg.eigvalsh(h_gram)) > 0
        assert np.min(np.linalg.eigvalsh(x_gram - h_gram)) > -1e-12 * np.max(np.abs(x_gram))
        gap = np.linalg.eigvalsh(mult[0.5] - mult[-0.5])
        assert np.min(gap) > -1e-12 * np.max(np.abs(mult[0.5]))

    def test_low_frequency_bound(self):
        values = np.array([[3.0, 4.0]], dtype=complex)
        sup, sample_max = low_frequency_bound(values, np.eye(2), np.array([[1.0, 0.0]], dtype=complex))
        assert sup == pytest.approx(5.0)
        assert sample_max == pytest.approx(3.0)


class TestCartesianNorms:
    """FFT-based Sobolev norms of gridded fields"""

    def setup_method(self):
        self.sigma = 0.12
        axis = np.linspace(-1.0, 1.0, 64)
        self.spacing = axis[1] - axis[0]
        xx, yy = np.meshgrid(axis, axis, indexing="ij")
        self.samples = np.exp(-(xx ** 2 + yy ** 2) / (2.0 * self.sigma ** 2))
        self.field = CartesianField.padded(self.samples, self.spacing, pad=16, origin=(-1.0, -1.0))

    def test_l2_norm_of_gaussian(self):
        expected = math.sqrt(math.pi * self.sigma ** 2)
        assert sobolev_norm(self.field, 0.0) == pytest.approx(expected, rel=1e-8)

    def test_norms_are_ordered(self):
        assert sobolev_norm(self.field, -0.5) < sobolev_norm(self.field, 0.0) < sobolev_norm(self.field, 0.5)

    def test_transform_at_origin_is_the_integral(self):
        _, _, f_hat = forward_transform(self.field)
        assert f_hat[0, 0].real == pytest.approx(2.0 * math.pi * self.sigma ** 2, rel=1e-8)

    def test_rejects_insufficient_padding(self):
        field = CartesianField.padded(self.samples, self.spacing, pad=2)
        with pytest.raises(ConfigError):
            sobolev_norm(field, 0.0)

    def test_rejects_unsupported_exponent(self):
        with pytest.raises(ConfigError):
            sobolev_norm(self.field, 0.3)

    def test_rejects_values_outside_support(self):
        with pytest.raises(ConfigError):
            sobolev_norm(self.field.with_values(np.ones_like(self.field.values)), 0.0)

    def test_rasterized_density_keeps_its_mass(self, unit_disc):
        field = rasterize_cells(unit_disc, np.ones(unit_disc.n_cells), 0.05, pad=4)
        total = np.sum(field.values).real * field.spacing ** 2
        assert total == pytest.approx(unit_disc.total_area(), rel=0.05)

    def test_inverse_undoes_forward(self):
        rng = np.random.default_rng(3)
        samples = rng.normal(size=(12, 9)) + 1j * rng.normal(size=(12, 9))
        field = CartesianField.padded(samples, 0.1, pad=4, origin=(-0.3, 0.7))
        _, _, f_hat = forward_transform(field)
        back = inverse_transform(f_hat, field)
        assert np.allclose(back.values, field.values, atol=1e-12)
        assert back.origin == field.origin and back.support == field.support

    def test_l2_norm_is_grid_parseval(self):
        rng = np.random.default_rng(4)
        field = CartesianField.padded(rng.normal(size=(10, 10)), 0.07, pad=4)
        direct = math.sqrt(np.sum(np.abs(field.values) ** 2) * field.spacing ** 2)
        assert sobolev_norm(field, 0.0) == pytest.approx(direct, rel=1e-12)


class TestCartesianDivergence:
    """Central-difference divergence and its Fourier symbol"""

    def setup_method(self):
        axis = np.linspace(-1.0, 1.0, 41)
        self.spacing = axis[1] - axis[0]
        xx, yy = np.meshgrid(axis, axis, indexing="ij")
        bump = np.exp(-(xx ** 2 + yy ** 2) / 0.08)
        self.fx = CartesianField.padded(xx * bump, self.spacing, pad=8, origin=(-1.0, -1.0))
        self.fy = CartesianField.padded((yy - 2.0 * xx) * bump, self.spacing, pad=8, origin=(-1.0, -1.0))

    def test_discrete_symbol(self):
        xi1, xi2, fx_hat = forward_transform(self.fx)
        _, _, fy_hat = forward_transform(self.fy)
        _, _, div_hat = forward_transform(cartesian_div(self.fx, self.fy))
        h = self.spacing
        expected = 1j * (np.sin(xi1 * h)[:, None] / h * fx_hat + np.sin(xi2 * h)[None, :] / h * fy_hat)
        assert np.allclose(div_hat, expected, atol=1e-12 * np.max(np.abs(div_hat)))

    def test_low_frequencies_follow_i_xi(self):
        xi1, xi2, fx_hat = forward_transform(self.fx)
        _, _, fy_hat = forward_transform(self.fy)
        _, _, div_hat = forward_transform(cartesian_div(self.fx, self.fy))
        low = (slice(0, 4), slice(0, 4))
        continuum = 1j * (xi1[:, None] * fx_hat + xi2[None, :] * fy_hat)
        assert np.allclose(div_hat[low], continuum[low], rtol=1e-3, atol=1e-3 * np.max(np.abs(div_hat)))

    def test_divergence_has_zero_mean(self):
        div = cartesian_div(self.fx, self.fy)
        assert abs(np.sum(div.values)) < 1e-10 * np.sum(np.abs(div.values))


class TestRasterizedEdgeField:
    """Gridded edge-basis fields against their closed-form transforms"""

    def test_mean_matches_closed_form(self, disc_solution):
        fx, fy = rasterize_edges(disc_solution.mesh, disc_solution.dofs, disc_solution.coefficients, 0.02)
        _, _, fx_hat = forward_transform(fx)
        _, _, fy_hat = forward_transform(fy)
        rastered = np.array([fx_hat[0, 0], fy_hat[0, 0]])
        exact = vector_density_transform(disc_solution.mesh, disc_solution.dofs, disc_solution.coefficients,
                                         np.zeros((1, 2)))[0]
        assert np.linalg.norm(rastered - exact) < 0.05 * np.linalg.norm(exact)

    def test_divergence_follows_closed_form_at_low_frequency(self, disc_solution):
        fx, fy = rasterize_edges(disc_solution.mesh, disc_solution.dofs, disc_solution.coefficients, 0.02)
        xi1, xi2, div_hat = forward_transform(cartesian_div(fx, fy))
        index = [(1, 0), (0, 1), (2, 1), (1, 2)]
        xi = np.array([[xi1[i], xi2[j]] for i, j in index])
        exact = 1j * np.sum(xi * vector_density_transform(disc_solution.mesh, disc_solution.dofs,
                                                          disc_solution.coefficients, xi), axis=1)
        rastered = np.array([div_hat[i, j] for i, j in index])
        assert np.linalg.norm(rastered - exact) < 0.1 * np.linalg.norm(exact)
