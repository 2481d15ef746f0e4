#!/usr/bin/env python3
"""
vector_bie.py - The electromagnetic aperture equation

Unknown: W = e3 x E on the aperture, expanded in edge (RWG) functions on the
interior edges. With A = int g W and Phi = int g div W, the scattered magnetic
field is H^s = -+ 2ik (A + grad Phi / k^2) above/below the screen, and
continuity of tangential H across the aperture in weak form reads

    B(W, V) = int int g [div W div V - k^2 W.V] = (ik/4) ((H^i + H^r)_t, V),

where the right side equals (ik/4) (e3 x Y, V) for Y = -e3 x (H^i + H^r).
The saddle form splits W = U + curl p with p a piecewise-linear multiplier
vanishing on the aperture boundary and constrains B(curl q, U) = 0.
"""

import logging
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
import scipy.sparse as sp

from .assembly import AssemblyFactory, AssemblyPath, QuadratureSettings
from .errors import ConfigError, MeshError, SolverError
from .geometry import ApertureMesh, DofTable, build_dofs
from .quadrature import cell_quadrature, map_rule
from .reports import SolveReport, dense_solve, energy_scaled_sigma_min
from .spectra import (SpectralGrid, SpectralSettings, grid_from_settings, low_frequency_bound,
                      low_frequency_xi, norm_grams, rwg_selection, vector_components, vector_density_transform)

IMAGE = np.array([1.0, 1.0, -1.0])
_UNIT_TOL = 1e-10


@dataclass
class WaveContext:
    """Incident plane wave E^i = amplitude p exp(ik m.r), H^i = amplitude q exp(ik m.r), q = m x p."""
    k: float
    m: np.ndarray
    p: np.ndarray
    amplitude: float = 1.0

    def __post_init__(self):
        self.m = np.asarray(self.m, dtype=float)
        self.p = np.asarray(self.p, dtype=float)
        if not self.k > 0:
            raise ConfigError(f"Wavenumber must be positive for the vector problem, got {self.k}", field="wave.k")
        if self.m.shape != (3,) or abs(np.linalg.norm(self.m) - 1.0) > _UNIT_TOL:
            raise ConfigError(f"Propagation direction must be a unit 3-vector, got {self.m.tolist()}",
                              field="wave.m")
        if not self.m[2] < 0:
            raise ConfigError("Incident wave must come from above (m3 < 0)", field="wave.m")
        if self.p.shape != (3,) or abs(np.linalg.norm(self.p) - 1.0) > _UNIT_TOL:
            raise ConfigError(f"Polarization must be a unit 3-vector, got {self.p.tolist()}", field="wave.p")
        if abs(float(self.p @ self.m)) > _UNIT_TOL:
            raise ConfigError("Polarization must be orthogonal to the propagation direction", field="wave.p")
        if not np.allclose(np.cross(self.q, self.m), self.p, atol=1e-9):
            raise ConfigError("Inconsistent polarization pair: p != q x m", field="wave.p")

    @property
    def q(self) -> np.ndarray:
        return np.cross(self.m, self.p)

    @classmethod
    def normal_incidence(cls, k: float, p=(1.0, 0.0, 0.0), amplitude: float = 1.0) -> 'WaveContext':
        return cls(k=k, m=np.array([0.0, 0.0, -1.0]), p=np.asarray(p, dtype=float), amplitude=amplitude)

    def scaled(self, amplitude: float) -> 'WaveContext':
        return WaveContext(k=self.k, m=self.m, p=self.p, amplitude=amplitude)

    def to_dict(self) -> Dict:
        return {"k": float(self.k), "m": self.m.tolist(), "p": self.p.tolist(), "amplitude": float(self.amplitude)}


def incident_fields(wave: WaveContext, r):
    """
    (E^i, H^i, E^r, H^r) at points r (..., 3).

    The reflected wave is the image of the incident one in a perfect conductor:
    tangential E and normal H flip sign.
    """
    r = np.asarray(r, dtype=float)
    phase_i = wave.amplitude * np.exp(1j * wave.k * (r @ wave.m))[..., None]
    phase_r = wave.amplitude * np.exp(1j * wave.k * ((r * IMAGE) @ wave.m))[..., None]
    e_i = phase_i * wave.p
    h_i = phase_i * wave.q
    e_r = -phase_r * (wave.p * IMAGE)
    h_r = phase_r * (wave.q * IMAGE)
    return e_i, h_i, e_r, h_r


def plane_H(wave: WaveContext, x) -> np.ndarray:
    """H^i + H^r on the screen plane at in-plane points x (..., 2)."""
    x = np.asarray(x, dtype=float)
    phase = wave.amplitude * np.exp(1j * wave.k * (x @ wave.m[:2]))[..., None]
    return phase * np.array([2.0 * wave.q[0], 2.0 * wave.q[1], 0.0])


def plane_Y(wave: WaveContext, x) -> np.ndarray:
    """Y = -e3 x (H^i + H^r) on the plane, returned as in-plane vectors (..., 2)."""
    h = plane_H(wave, x)
    return np.stack([h[..., 1], -h[..., 0]], axis=-1)


@dataclass
class LoadVector:
    """Projections (F, phi_i) of a tangential field onto the edge basis (test function conjugated)."""
    values: np.ndarray
    kind: str = "Y"

    def __len__(self) -> int:
        return len(self.values)


def _project(mesh: ApertureMesh, dofs: DofTable, field_fn, order: int = 6) -> np.ndarray:
    """(F, phi_i) for a tangential field F given at in-plane points (..., 2) -> (..., 2)."""
    tri = mesh.triangles
    points, weights = map_rule(cell_quadrature(order), tri)
    values = np.asarray(field_fn(points))
    rel = points[:, :, None, :] - tri[:, None, :, :]
    local = np.einsum("cq,cqd,cqad->ca", weights, values, rel) * mesh.rwg_coefficients()
    cell_dofs = dofs.cell_dofs()
    keep = cell_dofs >= 0
    out = np.zeros(dofs.n_vector, dtype=complex)
    np.add.at(out, cell_dofs[keep], local[keep])
    return out


def _e3_cross(v: np.ndarray) -> np.ndarray:
    return np.stack([-v[..., 1], v[..., 0]], axis=-1)


def rhs_Y(mesh: ApertureMesh, wave: WaveContext, dofs: Optional[DofTable] = None, order: int = 6,
          rotated: bool = False) -> LoadVector:
    """
    (Y, phi_i) for Y = -e3 x (H^i + H^r); with rotated=True the projection of
    e3 x Y = (H^i + H^r)_t, which drives the continuity equation.
    """
    dofs = dofs if dofs is not None else build_dofs(mesh)
    if rotated:
        values = _project(mesh, dofs, lambda x: _e3_cross(plane_Y(wave, x)), order)
        return LoadVector(values=values, kind="e3xY")
    return LoadVector(values=_project(mesh, dofs, lambda x: plane_Y(wave, x), order), kind="Y")


def continuity_load(mesh: ApertureMesh, wave: WaveContext, dofs: Optional[DofTable] = None,
                    order: int = 6) -> LoadVector:
    """(ik/4) (e3 x Y, phi_i), the load of the tangential-H continuity equation."""
    values = rhs_Y(mesh, wave, dofs, order, rotated=True).values
    return LoadVector(values=0.25j * wave.k * values, kind="continuity")


def _path(mesh: ApertureMesh, assembly: Optional[AssemblyPath], path: str) -> AssemblyPath:
    if assembly is not None:
        if assembly.mesh is not mesh:
            raise ConfigError("Assembly path was built for a different mesh", field="assembly")
        return assembly
    return AssemblyFactory.create_path(path, mesh)


def assemble_L_parts(mesh: ApertureMesh, k: float, assembly: Optional[AssemblyPath] = None,
                     path: str = "spatial") -> Tuple[np.ndarray, np.ndarray]:
    """(V, S): int int g phi_j.phi_i and int int g div phi_j div phi_i."""
    return _path(mesh, assembly, path).vector_parts(k)


def assemble_L_spatial(mesh: ApertureMesh, k: float, quadrature: Optional[QuadratureSettings] = None,
                       threads: Optional[int] = None) -> np.ndarray:
    return AssemblyFactory.create_path("spatial", mesh, quadrature=quadrature, threads=threads).vector_matrix(k)


def assemble_B_spectral(mesh: ApertureMesh, k: float, grid: Optional[SpectralGrid] = None,
                        spectral: Optional[SpectralSettings] = None) -> np.ndarray:
    return AssemblyFactory.create_path("spectral", mesh, spectral=spectral, grid=grid).vector_matrix(k)


@dataclass(eq=False)
class VectorDensity:
    """Edge-basis coefficients of W on the interior edges of a mesh."""
    mesh: ApertureMesh
    dofs: DofTable
    k: float
    coefficients: np.ndarray
    report: Optional[SolveReport] = None

    def __post_init__(self):
        self.coefficients = np.asarray(self.coefficients, dtype=complex)
        if self.coefficients.shape != (self.dofs.n_vector,):
            raise MeshError(f"Density has {self.coefficients.size} coefficients for "
                            f"{self.dofs.n_vector} interior edges")

    def transform(self, xi) -> np.ndarray:
        """W^(xi), shape (n_xi, 2)."""
        return vector_density_transform(self.mesh, self.dofs, self.coefficients, np.atleast_2d(xi))

    def divergence(self) -> np.ndarray:
        """Constant divergence on each cell."""
        return self.dofs.divergence_matrix() @ self.coefficients

    def to_dict(self) -> Dict:
        return {
            "mesh_hash": self.mesh.content_hash(),
            "k": float(self.k),
            "coefficients": [[float(c.real), float(c.imag)] for c in self.coefficients],
            "edge_orientation": {
                "columns": ["dof", "edge", "low_vertex", "high_vertex"],
                "rows": self.dofs.edge_orientation_table(),
            },
        }

    @classmethod
    def from_dict(cls, data: Dict, mesh: ApertureMesh, dofs: Optional[DofTable] = None) -> 'VectorDensity':
        for key in ("mesh_hash", "k", "coefficients"):
            if key not in data:
                raise ConfigError(f"Missing required density key: {key}", field=key)
        if data["mesh_hash"] != mesh.content_hash():
            raise MeshError("Density was computed on a different mesh (hash mismatch)")
        dofs = dofs if dofs is not None else build_dofs(mesh)
        values = np.asarray(data["coefficients"], dtype=float).reshape(-1, 2)
        return cls(mesh=mesh, dofs=dofs, k=float(data["k"]), coefficients=values[:, 0] + 1j * values[:, 1])


def solve_direct(mesh: ApertureMesh, wave: WaveContext, assembly: Optional[AssemblyPath] = None,
                 path: str = "spatial", scaled_sigma: bool = False) -> VectorDensity:
    """
    Solve B w = (ik/4)((H^i + H^r)_t, phi_i).

    Raises:
        SolverError: if B is singular or ill-conditioned on this mesh
    """
    assembly = _path(mesh, assembly, path)
    matrix = assembly.vector_matrix(wave.k)
    load = continuity_load(mesh, wave, assembly.dofs)
    solution, report = dense_solve(matrix, load.values, path=assembly.name)
    report.merge_warnings(assembly.warnings)
    if scaled_sigma:
        report.extra["sigma_min_scaled"] = vector_sigma_min_scaled(mesh, wave.k, assembly)
    return VectorDensity(mesh=mesh, dofs=assembly.dofs, k=wave.k, coefficients=solution, report=report)


def vector_sigma_min_scaled(mesh: ApertureMesh, k: float, assembly: Optional[AssemblyPath] = None) -> Optional[float]:
    """Smallest singular value of B in the energy scaling of the static Gram V0 + S0."""
    assembly = _path(mesh, assembly, "spatial")
    mass0, div0 = assembly.vector_parts(0.0)
    return energy_scaled_sigma_min(assembly.vector_matrix(k), mass0 + div0)


def assemble_E(mesh: ApertureMesh, k: float, assembly: Optional[AssemblyPath] = None,
               path: str = "spatial") -> np.ndarray:
    """E[i, j] = B(curl q_j, phi_i), shape (n_vector, n_multiplier)."""
    assembly = _path(mesh, assembly, path)
    curl = assembly.dofs.curl_matrix()
    return np.asarray((curl.T @ assembly.vector_matrix(k).T).T)


def rwg_mass(mesh: ApertureMesh, dofs: DofTable) -> sp.csr_matrix:
    """L2 Gram int phi_i . phi_j of the edge basis (sparse, n_vector x n_vector)."""
    pts, wts = map_rule(cell_quadrature(2), mesh.triangles)
    rel = pts[:, :, None, :] - mesh.triangles[:, None, :, :]
    local = np.einsum("cq,cqad,cqbd->cab", wts, rel, rel)
    idx = np.arange(3 * mesh.n_cells).reshape(-1, 3)
    rows = np.repeat(idx, 3, axis=1).ravel()
    cols = np.tile(idx, (1, 3)).ravel()
    blocks = sp.csr_matrix((local.ravel(), (rows, cols)), shape=(3 * mesh.n_cells, 3 * mesh.n_cells))
    selection = rwg_selection(mesh, dofs)
    return (selection.T @ blocks @ selection).tocsr()


def discrete_curl(mesh: ApertureMesh, dofs: DofTable, u: np.ndarray,
                  mass: Optional[sp.csr_matrix] = None) -> np.ndarray:
    """
    Weak scalar curl of an edge field against the interior hat functions,
    (u, curl q_j) in L2, one value per interior vertex.
    """
    mass = rwg_mass(mesh, dofs) if mass is None else mass
    return np.asarray(dofs.curl_matrix().T @ (mass @ np.asarray(u)))


@dataclass(eq=False)
class SaddleState:
    """Saddle-point solution: divergence-constrained part U and multiplier p."""
    U: VectorDensity
    p_mult: np.ndarray
    report: Optional[SolveReport] = None

    def reconstruct(self) -> np.ndarray:
        """Coefficients of W = U + curl p."""
        return self.U.coefficients + self.U.dofs.curl_matrix() @ self.p_mult

    def to_dict(self) -> Dict:
        data = self.U.to_dict()
        data["multiplier"] = [[float(c.real), float(c.imag)] for c in self.p_mult]
        data["interior_vertices"] = self.U.dofs.interior_vertices.tolist()
        return data


def solve_saddle(mesh: ApertureMesh, wave: WaveContext, assembly: Optional[AssemblyPath] = None,
                 path: str = "spatial") -> SaddleState:
    """
    Solve [[B, E], [E^T, 0]] (U, p) = (load, 0).

    Raises:
        SolverError: if the curl of the multiplier basis is rank deficient or the
            block system is singular
    """
    start_time = time.time()
    assembly = _path(mesh, assembly, path)
    dofs = assembly.dofs
    curl = dofs.curl_matrix().toarray()
    n_vec, n_mult = curl.shape
    rank = int(np.linalg.matrix_rank(curl)) if n_mult else 0
    if rank < n_mult:
        raise SolverError(f"Multiplier basis is not independent (rank {rank} < {n_mult})",
                          {"rank": rank, "n_multiplier": n_mult})

    b_mat = assembly.vector_matrix(wave.k)
    e_mat = b_mat @ curl
    system = np.zeros((n_vec + n_mult, n_vec + n_mult), dtype=complex)
    system[:n_vec, :n_vec] = b_mat
    system[:n_vec, n_vec:] = e_mat
    system[n_vec:, :n_vec] = e_mat.T
    rhs = np.zeros(n_vec + n_mult, dtype=complex)
    rhs[:n_vec] = continuity_load(mesh, wave, dofs).values

    solution, report = dense_solve(system, rhs, path=f"{assembly.name}-saddle")
    report.merge_warnings(assembly.warnings)
    u = solution[:n_vec]
    constraint = e_mat.T @ u
    scale = max(np.linalg.norm(e_mat) * np.linalg.norm(u), 1e-300)
    report.extra["constraint_residual"] = float(np.linalg.norm(constraint) / scale)
    logging.info(f"Saddle solve ({n_vec} + {n_mult} unknowns) done in {time.time() - start_time:.2f} seconds")
    density = VectorDensity(mesh=mesh, dofs=dofs, k=wave.k, coefficients=u, report=report)
    return SaddleState(U=density, p_mult=solution[n_vec:], report=report)


@dataclass
class CoercivityReport:
    """Empirical Garding and inf-sup constants of B and E on one mesh."""
    k: float
    n_vector: int
    alpha: float
    c: float
    beta: Optional[float]
    sigma_min_scaled: Optional[float]
    linfty_sup: float
    linfty_samples: float
    im_max: float
    div_free_re_max: Optional[float]
    warnings: List[str] = field(default_factory=list)

    def to_dict(self) -> Dict:
        return dict(self.__dict__)


def _quadratic(samples: np.ndarray, matrix: np.ndarray) -> np.ndarray:
    return np.einsum("si,ij,sj->s", samples.conj(), matrix, samples)


def coercivity_probe(mesh: ApertureMesh, k: float, n_samples: int = 50, seed: int = 0,
                     assembly: Optional[AssemblyPath] = None,
                     spectral: Optional[SpectralSettings] = None) -> CoercivityReport:
    """
    Sample Re B(u, u) against the discrete X and H norms.

    c is twice the largest observed ratio -Re B(u, u) / ||u||_H^2 (zero if B
    never goes negative), and alpha = min (Re B(u, u) + c ||u||_H^2) / ||u||_X^2.
    Half of the samples are random edge fields and half are curls of random
    multipliers, where the transverse term dominates. beta is the smallest
    ratio sup_u |E(q, u)| / ||u||_X over (||q||_1/2 - ||q||_-1/2).
    """
    start_time = time.time()
    assembly = _path(mesh, assembly, "spatial")
    dofs = assembly.dofs
    spectral = spectral or SpectralSettings()
    grid = grid_from_settings(spectral, k, mesh.h_max)
    rng = np.random.default_rng(seed)
    warnings = list(assembly.warnings)

    b_mat = assembly.vector_matrix(k)
    h_gram, x_gram, mult_grams = norm_grams(mesh, dofs, grid, (0.5, -0.5) if dofs.n_multiplier else ())
    curl = dofs.curl_matrix()
    n_vec, n_mult = dofs.n_vector, dofs.n_multiplier

    n_free = n_samples // 2 if n_mult else 0
    general = rng.standard_normal((n_samples - n_free, n_vec)) + 1j * rng.standard_normal((n_samples - n_free, n_vec))
    multipliers = rng.standard_normal((n_free, n_mult))
    div_free = np.asarray((curl @ multipliers.T).T).astype(complex) if n_free else np.zeros((0, n_vec), complex)
    samples = np.vstack([general, div_free])

    forms = _quadratic(samples, b_mat)
    re_b = forms.real
    x_norm = _quadratic(samples, x_gram).real
    h_norm = _quadratic(samples, h_gram).real
    c = 2.0 * max(0.0, float(np.max(-re_b / h_norm)))
    alpha = float(np.min((re_b + c * h_norm) / x_norm))
    im_max = float(np.max(forms.imag / np.sum(np.abs(samples) ** 2, axis=1)))
    div_free_re = float(np.max(re_b[len(general):] / x_norm[len(general):])) if n_free else None

    beta = None
    if n_mult:
        q_samples = rng.standard_normal((n_samples, n_mult))
        plus, minus = mult_grams[0.5].real, mult_grams[-0.5].real
        e_cols = b_mat @ np.asarray((curl @ q_samples.T))
        dual = np.real(np.einsum("is,is->s", e_cols.conj(), np.linalg.solve(x_gram, e_cols)))
        gap = np.sqrt(np.einsum("si,ij,sj->s", q_samples, plus, q_samples)) - \
            np.sqrt(np.einsum("si,ij,sj->s", q_samples, minus, q_samples))
        beta = float(np.min(np.sqrt(np.maximum(dual, 0.0)) / gap))

    xi_low = low_frequency_xi(grid)
    if len(xi_low):
        a1, a2 = vector_components(mesh, dofs, xi_low)
        values = np.stack([a1, a2], axis=1)
    else:
        values = np.zeros((0, 2, n_vec))
    linfty_sup, linfty_samples = low_frequency_bound(values, h_gram, general)

    sigma = vector_sigma_min_scaled(mesh, k, assembly)
    if alpha <= 0:
        message = f"No positive Garding constant found on this mesh (alpha={alpha:.3e})"
        logging.warning(message)
        warnings.append(message)
    logging.info(f"Coercivity probe ({n_vec} unknowns, k={k:g}) done in {time.time() - start_time:.2f} seconds")
    return CoercivityReport(k=k, n_vector=n_vec, alpha=alpha, c=c, beta=beta, sigma_min_scaled=sigma,
                            linfty_sup=linfty_sup, linfty_samples=linfty_samples, im_max=im_max,
                            div_free_re_max=div_free_re, warnings=warnings)
