#!/usr/bin/env python3
"""
spectral_path.py - Galerkin matrices from the kernel symbol

T = (1/4pi^2) sum w g0^ conj(chi_i) chi_j
B = (1/4pi^2) sum w g0^ [(|xi|^2 - k^2) conj(a1_i) a1_j - k^2 conj(a2_i) a2_j]
"""

import logging
import time
from typing import Dict, Optional, Tuple

import numpy as np

from ..errors import ConfigError
from ..geometry import ApertureMesh, DofTable
from ..spectra import (INVERSE_PREFACTOR, SpectralGrid, SpectralSettings, cell_transforms,
                       grid_from_settings, rwg_selection, vector_components)
from .base import AssemblyPath


class SpectralAssembly(AssemblyPath):
    """Spectral (Fourier-symbol) assembly"""

    name = "spectral"

    def __init__(self, mesh: ApertureMesh, dofs: Optional[DofTable] = None,
                 spectral: Optional[SpectralSettings] = None, grid: Optional[SpectralGrid] = None):
        super().__init__(mesh, dofs)
        self.spectral = spectral or SpectralSettings()
        self._grid = grid
        self._cache: Dict[float, tuple] = {}

    def grid_for(self, k: float) -> SpectralGrid:
        if self._grid is not None:
            if abs(self._grid.k - k) > 1e-14 * max(1.0, k):
                raise ConfigError(f"Spectral grid built for k={self._grid.k} used at k={k}", field="wave.k")
            grid = self._grid
        else:
            grid = grid_from_settings(self.spectral, k, self.mesh.h_max)
        if grid.xi_max * self.mesh.h_min < 20.0:
            message = (f"xi_max={grid.xi_max:.3g} does not resolve the smallest cell "
                       f"(h_min={self.mesh.h_min:.3g}); spectral matrices lose accuracy")
            if message not in self.warnings:
                logging.warning(message)
                self.warnings.append(message)
        return grid

    def scalar_matrix(self, k: float) -> np.ndarray:
        key = ("scalar", float(k))
        if key in self._cache:
            return self._cache[key]
        start_time = time.time()
        grid = self.grid_for(k)
        n = self.mesh.n_cells
        t_mat = np.zeros((n, n), dtype=complex)
        for chunk in grid.chunks():
            chi = cell_transforms(self.mesh.triangles, chunk.xi).chi
            t_mat += chi.conj().T @ (chi * chunk.symbol_weights[:, None])
        t_mat = INVERSE_PREFACTOR * t_mat
        t_mat = 0.5 * (t_mat + t_mat.T)
        logging.info(f"Spectral scalar assembly ({grid.size} nodes) done in {time.time() - start_time:.2f} seconds")
        self._cache[key] = t_mat
        return t_mat

    def vector_parts(self, k: float) -> Tuple[np.ndarray, np.ndarray]:
        key = ("vector", float(k))
        if key in self._cache:
            return self._cache[key]
        start_time = time.time()
        grid = self.grid_for(k)
        selection = rwg_selection(self.mesh, self.dofs)
        n = self.dofs.n_vector
        mass = np.zeros((n, n), dtype=complex)
        div_gram = np.zeros((n, n), dtype=complex)
        for chunk in grid.chunks():
            a1, a2 = vector_components(self.mesh, self.dofs, chunk.xi, selection)
            sw = chunk.symbol_weights[:, None]
            mass += a1.conj().T @ (a1 * sw) + a2.conj().T @ (a2 * sw)
            div_gram += a1.conj().T @ (a1 * (sw * chunk.rho[:, None] ** 2))
        mass = INVERSE_PREFACTOR * mass
        div_gram = INVERSE_PREFACTOR * div_gram
        mass = 0.5 * (mass + mass.T)
        div_gram = 0.5 * (div_gram + div_gram.T)
        logging.info(f"Spectral vector assembly ({grid.size} nodes) done in {time.time() - start_time:.2f} seconds")
        self._cache[key] = (mass, div_gram)
        return mass, div_gram
