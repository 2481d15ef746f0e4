#!/usr/bin/env python3
"""
scalar_bie.py - Scalar diffraction by an aperture in a sound-hard screen

The incident wave u^i = exp(ik m.r) comes from above and the screen reflects
it as u^r = exp(ik m'.r), m' = (m1, m2, -m3). The scattered field is a single
layer of the aperture density psi = du^s/dr3:

    u^s(r) = -2 int g(r, r') psi(r') dr'   above the screen,
    u^s(r) = +2 int g(r, r') psi(r') dr'   below it.

Continuity of the total field across the aperture gives 2 T[psi] = u^i on the
aperture, with T[psi](x) = int g(x, x') psi(x') dx'.
"""

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Union

import numpy as np
import scipy.linalg

from .assembly import AssemblyFactory, AssemblyPath, QuadratureSettings
from .errors import ConfigError, MeshError, SingularityError
from .geometry import ApertureMesh
from .parallel import run_chunks
from .potentials import TargetSweep
from .quadrature import cell_quadrature, map_rule
from .reports import SolveReport, dense_solve, energy_scaled_sigma_min
from .spectra import (SpectralGrid, SpectralSettings, cell_transforms, grid_from_settings,
                      low_frequency_bound, low_frequency_xi, scalar_norm_gram)


@dataclass
class ScalarWave:
    """Incident plane wave exp(ik m.r) with m3 < 0."""
    k: float
    m: np.ndarray
    amplitude: float = 1.0

    def __post_init__(self):
        self.m = np.asarray(self.m, dtype=float)
        if self.k < 0:
            raise ConfigError(f"Wavenumber must be non-negative, got {self.k}", field="wave.k")
        if self.m.shape != (3,) or abs(np.linalg.norm(self.m) - 1.0) > 1e-12:
            raise ConfigError(f"Propagation direction must be a unit 3-vector, got {self.m.tolist()}",
                              field="wave.m")
        if not self.m[2] < 0:
            raise ConfigError("Incident wave must come from above (m3 < 0)", field="wave.m")

    @property
    def reflected_direction(self) -> np.ndarray:
        return self.m * np.array([1.0, 1.0, -1.0])


@dataclass(eq=False)
class ScalarDensity:
    """Piecewise-constant density psi on a mesh."""
    mesh: ApertureMesh
    k: float
    coefficients: np.ndarray
    report: Optional[SolveReport] = None

    def __post_init__(self):
        self.coefficients = np.asarray(self.coefficients, dtype=complex)
        if self.coefficients.shape != (self.mesh.n_cells,):
            raise MeshError(f"Density has {self.coefficients.size} coefficients for {self.mesh.n_cells} cells")

    def integral(self) -> complex:
        return complex(np.sum(self.coefficients * self.mesh.areas))

    def to_dict(self) -> Dict:
        return {
            "mesh_hash": self.mesh.content_hash(),
            "k": float(self.k),
            "coefficients": [[float(c.real), float(c.imag)] for c in self.coefficients],
        }

    @classmethod
    def from_dict(cls, data: Dict, mesh: ApertureMesh) -> 'ScalarDensity':
        for key in ("mesh_hash", "k", "coefficients"):
            if key not in data:
                raise ConfigError(f"Missing required density key: {key}", field=key)
        if data["mesh_hash"] != mesh.content_hash():
            raise MeshError("Density was computed on a different mesh (hash mismatch)")
        values = np.asarray(data["coefficients"], dtype=float)
        return cls(mesh=mesh, k=float(data["k"]), coefficients=values[:, 0] + 1j * values[:, 1])


def incident_scalar(wave: ScalarWave, r):
    """(u^i, u^r) at points r (..., 3)."""
    r = np.asarray(r, dtype=float)
    u_i = wave.amplitude * np.exp(1j * wave.k * (r @ wave.m))
    u_r = wave.amplitude * np.exp(1j * wave.k * (r @ wave.reflected_direction))
    return u_i, u_r


def assemble_T_spatial(mesh: ApertureMesh, k: float, quadrature: Optional[QuadratureSettings] = None,
                       threads: Optional[int] = None) -> np.ndarray:
    return AssemblyFactory.create_path("spatial", mesh, quadrature=quadrature, threads=threads).scalar_matrix(k)


def assemble_T_spectral(mesh: ApertureMesh, k: float, grid: Optional[SpectralGrid] = None,
                        spectral: Optional[SpectralSettings] = None) -> np.ndarray:
    return AssemblyFactory.create_path("spectral", mesh, spectral=spectral, grid=grid).scalar_matrix(k)


def scalar_load(mesh: ApertureMesh, rhs: Union[float, complex, Callable[[np.ndarray], np.ndarray]],
                order: int = 6) -> np.ndarray:
    """Galerkin load int_cell f for a constant or a function of in-plane points (..., 2)."""
    if not callable(rhs):
        return complex(rhs) * mesh.areas.astype(complex)
    points, weights = map_rule(cell_quadrature(order), mesh.triangles)
    return np.sum(weights * np.asarray(rhs(points), dtype=complex), axis=1)


def _path(mesh: ApertureMesh, assembly: Optional[AssemblyPath], path: str) -> AssemblyPath:
    if assembly is not None:
        if assembly.mesh is not mesh:
            raise ConfigError("Assembly path was built for a different mesh", field="assembly")
        return assembly
    return AssemblyFactory.create_path(path, mesh)


def solve_T(mesh: ApertureMesh, k: float, rhs, assembly: Optional[AssemblyPath] = None,
            path: str = "spatial") -> ScalarDensity:
    """
    Solve T[psi] = f on the aperture (k = 0, f = 1 is the electrified disc).

    Raises:
        SolverError: if the Galerkin matrix is singular or ill-conditioned
    """
    assembly = _path(mesh, assembly, path)
    matrix = assembly.scalar_matrix(k)
    solution, report = dense_solve(matrix, scalar_load(mesh, rhs), path=assembly.name)
    report.merge_warnings(assembly.warnings)
    return ScalarDensity(mesh=mesh, k=k, coefficients=solution, report=report)


def solve_scalar(mesh: ApertureMesh, wave: ScalarWave, assembly: Optional[AssemblyPath] = None,
                 path: str = "spatial") -> ScalarDensity:
    """Solve the aperture equation 2 T[psi] = u^i restricted to the aperture."""
    assembly = _path(mesh, assembly, path)
    matrix = 2.0 * assembly.scalar_matrix(wave.k)
    m_t = wave.m[:2]

    def incident(points):
        return wave.amplitude * np.exp(1j * wave.k * (points @ m_t))

    solution, report = dense_solve(matrix, scalar_load(mesh, incident), path=assembly.name)
    report.merge_warnings(assembly.warnings)
    return ScalarDensity(mesh=mesh, k=wave.k, coefficients=solution, report=report)


class ScalarFieldEvaluator:
    """Scattered field u^s of a solved density at points in space."""

    def __init__(self, density: ScalarDensity, near_order: int = 6, far_order: int = 4,
                 threads: Optional[int] = None, chunk_size: int = 64):
        self.density = density
        self.mesh = density.mesh
        self.near_order = near_order
        self.far_order = far_order
        self.threads = threads
        self.chunk_size = chunk_size

    def _upper(self, z: np.ndarray, side: Optional[np.ndarray]) -> np.ndarray:
        upper = z > 0
        if side is not None:
            upper = np.where(z == 0.0, np.broadcast_to(side, z.shape) > 0, upper)
        return upper

    def _sweep(self, points, side, derivative: bool) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        n = len(points)
        z = points[:, 2]
        if side is None and np.any(z == 0.0):
            raise SingularityError("On-plane evaluation needs a side (+1 upper, -1 lower)")
        side_arr = None if side is None else np.broadcast_to(np.asarray(side, dtype=float), (n,))
        sign = np.where(self._upper(z, side_arr), -2.0, 2.0)
        out = np.zeros(n, dtype=complex)
        psi = self.density.coefficients
        k = self.density.k

        def work(start, stop):
            sweep = TargetSweep(self.mesh, points[start:stop, :2], z[start:stop],
                                None if side_arr is None else side_arr[start:stop],
                                near_order=self.near_order, far_order=self.far_order)
            total = np.zeros(stop - start, dtype=complex)
            for c in range(self.mesh.n_cells):
                p0, _, g0, _ = sweep.cell(c, k)
                total += psi[c] * (g0[:, 2] if derivative else p0)
            out[start:stop] = sign[start:stop] * total

        run_chunks(work, n, self.chunk_size, self.threads)
        return out

    def evaluate(self, points, side=None) -> np.ndarray:
        """u^s at points (m, 3); side (+1/-1) selects the limit for on-plane points."""
        return self._sweep(points, side, derivative=False)

    def normal_derivative(self, points, side=None) -> np.ndarray:
        """du^s/dr3 at points (m, 3)."""
        return self._sweep(points, side, derivative=True)


@dataclass
class ScalarProbeReport:
    """Empirical constants of the scalar operator on one mesh."""
    k: float
    n_cells: int
    coercivity: float
    coercivity_samples: float
    positive_fraction: float
    sigma_min_scaled: Optional[float]
    linfty_sup: float
    linfty_samples: float
    warnings: List[str] = field(default_factory=list)

    def to_dict(self) -> Dict:
        return dict(self.__dict__)


def scalar_probe(mesh: ApertureMesh, k: float, n_samples: int = 50, seed: int = 0,
                 assembly: Optional[AssemblyPath] = None, spectral: Optional[SpectralSettings] = None
                 ) -> ScalarProbeReport:
    """
    Coercivity of T0 against the discrete H~^-1/2 norm, energy-scaled smallest
    singular value of T and the low-frequency bound max_{|xi| <= 2k} |psi^| / ||psi||.
    """
    start_time = time.time()
    assembly = _path(mesh, assembly, "spatial")
    spectral = spectral or SpectralSettings()
    grid = grid_from_settings(spectral, k, mesh.h_max)
    rng = np.random.default_rng(seed)

    t_static = np.real(assembly.scalar_matrix(0.0))
    gram = scalar_norm_gram(mesh, grid, -0.5)
    gram_real = np.real(gram)
    samples = rng.standard_normal((n_samples, mesh.n_cells))
    forms = np.einsum("si,ij,sj->s", samples, t_static, samples)
    norms = np.einsum("si,ij,sj->s", samples, gram_real, samples)
    ratios = forms / norms
    # smallest generalized eigenvalue of (T0, M) is the discrete coercivity constant
    coercivity = float(scipy.linalg.eigh(0.5 * (t_static + t_static.T), gram_real, eigvals_only=True)[0])

    sigma = energy_scaled_sigma_min(assembly.scalar_matrix(k), t_static) if k > 0 else None

    xi_low = low_frequency_xi(grid)
    chi = cell_transforms(mesh.triangles, xi_low).chi if len(xi_low) else np.zeros((0, mesh.n_cells))
    sup, sample_max = low_frequency_bound(chi, gram, samples.astype(complex))

    warnings = list(assembly.warnings)
    if coercivity <= 0:
        message = f"T0 is not coercive on this mesh (smallest ratio {coercivity:.3e})"
        logging.warning(message)
        warnings.append(message)
    logging.info(f"Scalar probe ({mesh.n_cells} cells, k={k:g}) done in {time.time() - start_time:.2f} seconds")
    return ScalarProbeReport(k=k, n_cells=mesh.n_cells, coercivity=coercivity,
                             coercivity_samples=float(np.min(ratios)),
                             positive_fraction=float(np.mean(forms > 0)),
                             sigma_min_scaled=sigma, linfty_sup=sup, linfty_samples=sample_max,
                             warnings=warnings)


def electrified_disc_total(radius: float = 1.0) -> float:
    """Closed-form int psi for T0[psi] = 1 on a disc: psi = (4/pi)(a^2 - rho^2)^-1/2, total 8a."""
    return 8.0 * radius


def electrified_disc_density(rho: np.ndarray, radius: float = 1.0) -> np.ndarray:
    return (4.0 / math.pi) / np.sqrt(radius ** 2 - np.asarray(rho) ** 2)
