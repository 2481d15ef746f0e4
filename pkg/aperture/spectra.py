#!/usr/bin/env python3
"""
spectra.py - Fourier conventions, the half-space symbol and spectral quadrature

Convention (fixed):
    f^(xi) = integral exp(-i x.xi) f(x) dx
    f(x)   = 1/(4 pi^2) integral exp(+i x.xi) f^(xi) dxi

The symbol of the planar single-layer kernel exp(ikR)/(4 pi R) is
    g0^(xi) = i / (2 sqrt(k^2 - |xi|^2)),
with sqrt(k^2 - |xi|^2) = i sqrt(|xi|^2 - k^2) beyond |xi| = k.
"""

import logging
import math
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Callable, Iterator, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.special import j0

from .errors import ConfigError, SingularityError
from .quadrature import cell_quadrature, gauss_legendre, map_rule

INVERSE_PREFACTOR = 1.0 / (4.0 * math.pi ** 2)

# radial regions of a spectral grid
INNER, NEAR, FAR = 0, 1, 2

_branch = 1.0


@contextmanager
def corrupted_branch():
    """Flip the evanescent branch of the symbol (fault-injection hook for validation)."""
    global _branch
    _branch = -1.0
    try:
        yield
    finally:
        _branch = 1.0


@dataclass
class SpectralSettings:
    """Spectral grid parameters; xi_max None means 'choose from the mesh'."""
    xi_max: Optional[float] = None
    n_radial: int = 8
    n_angular: int = 384
    panel_width: float = 1.0
    eps_xi: float = 1e-8
    chunk_size: int = 4096

    def resolve_xi_max(self, k: float, h_max: float) -> float:
        if self.xi_max is not None:
            return float(self.xi_max)
        return max(2.5 * k, 40.0 / h_max)


def symbol_g0(xi, k: float, eps_xi: float = 1e-8) -> np.ndarray:
    """
    Direct evaluation of the half-space symbol at points xi (..., 2).

    Raises:
        SingularityError: if some |xi| lies within eps_xi * k of k (or xi = 0 for k = 0)
    """
    xi = np.asarray(xi, dtype=float)
    rho = np.linalg.norm(xi, axis=-1)
    band = eps_xi * k if k > 0 else 0.0
    if np.any(np.abs(rho - k) <= band):
        raise SingularityError(f"Symbol evaluated inside the exclusion band |xi| = k +- {band:.3g}")
    root = np.sqrt(np.abs(k ** 2 - rho ** 2))
    inner = 1j / (2.0 * np.where(rho < k, root, 1.0))
    outer = _branch / (2.0 * np.where(rho > k, root, 1.0))
    return np.where(rho < k, inner, outer)


@dataclass
class HelmholtzComponents:
    """Longitudinal (a1, along xi^) and transverse (a2, along xi^perp) parts."""
    a1: np.ndarray
    a2: np.ndarray

    def reconstruct(self, xi: np.ndarray) -> np.ndarray:
        unit, perp = unit_frames(xi)
        return self.a1[..., None] * unit + self.a2[..., None] * perp


def unit_frames(xi: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """xi^ and xi^perp = (xi2, -xi1)/|xi| for nonzero xi (..., 2)."""
    xi = np.asarray(xi, dtype=float)
    rho = np.linalg.norm(xi, axis=-1, keepdims=True)
    if np.any(rho == 0.0):
        raise SingularityError("Helmholtz frame undefined at xi = 0")
    unit = xi / rho
    perp = np.stack([unit[..., 1], -unit[..., 0]], axis=-1)
    return unit, perp


def helmholtz_decompose(v_hat, xi) -> HelmholtzComponents:
    """Split transformed tangential fields v_hat (..., 2) at xi (..., 2)."""
    unit, perp = unit_frames(xi)
    v_hat = np.asarray(v_hat)
    return HelmholtzComponents(a1=np.sum(v_hat * unit, axis=-1), a2=np.sum(v_hat * perp, axis=-1))


@dataclass
class GridChunk:
    """A block of 2-D grid nodes with their weights and symbol-weighted weights."""
    xi: np.ndarray
    rho: np.ndarray
    u: np.ndarray
    region: np.ndarray
    weights: np.ndarray
    symbol_weights: np.ndarray


class SpectralGrid:
    """
    Polar quadrature over the disc |xi| <= xi_max.

    Radially the grid uses the branch variable u = sqrt(|rho^2 - k^2|) on the
    three ranges rho < k, k < rho < 2k and 2k < rho < xi_max, each split into
    Gauss-Legendre panels of width panel_width in u. The Jacobian rho drho = u du
    is folded into the weights, and the symbol is computed from u so that the
    integrable 1/u singularity at rho = k never meets a division by zero.
    Angularly the grid is a trapezoid rule with half-step offset.
    """

    def __init__(self, k: float, xi_max: float, n_radial: int, n_angular: int,
                 panel_width: float = 1.0, eps_xi: float = 1e-8, chunk_size: int = 4096):
        self.k = float(k)
        self.xi_max = float(xi_max)
        self.n_radial = int(n_radial)
        self.n_angular = int(n_angular)
        self.panel_width = float(panel_width)
        self.eps_xi = float(eps_xi)
        self.chunk_size = int(chunk_size)

        self.rho, self.u, self.radial_weights, self.region = self._radial_nodes()
        self.theta = 2.0 * math.pi * (np.arange(self.n_angular) + 0.5) / self.n_angular
        self.angular_weight = 2.0 * math.pi / self.n_angular

        if self.k > 0:
            gap = np.abs(self.rho - self.k)
            if np.any(gap < self.eps_xi * self.k):
                raise SingularityError("Spectral grid node inside the exclusion band around |xi| = k")

    def _panels(self, u0: float, u1: float) -> Tuple[np.ndarray, np.ndarray]:
        n_panels = max(1, int(math.ceil((u1 - u0) / self.panel_width)))
        edges = np.linspace(u0, u1, n_panels + 1)
        nodes, weights = [], []
        for a, b in zip(edges[:-1], edges[1:]):
            x, w = gauss_legendre(self.n_radial, a, b)
            nodes.append(x)
            weights.append(w)
        return np.concatenate(nodes), np.concatenate(weights)

    def _radial_nodes(self):
        k = self.k
        rho, u, w, region = [], [], [], []
        if k > 0:
            ui, wi = self._panels(0.0, k)
            rho.append(np.sqrt(k ** 2 - ui ** 2))
            u.append(ui)
            w.append(wi * ui)
            region.append(np.full(len(ui), INNER))

            un, wn = self._panels(0.0, math.sqrt(3.0) * k)
            rho.append(np.sqrt(k ** 2 + un ** 2))
            u.append(un)
            w.append(wn * un)
            region.append(np.full(len(un), NEAR))
            u_far = (math.sqrt(3.0) * k, math.sqrt(self.xi_max ** 2 - k ** 2))
        else:
            u_far = (0.0, self.xi_max)

        uf, wf = self._panels(*u_far)
        rho.append(np.sqrt(k ** 2 + uf ** 2))
        u.append(uf)
        w.append(wf * uf)
        region.append(np.full(len(uf), FAR))
        return (np.concatenate(rho), np.concatenate(u), np.concatenate(w),
                np.concatenate(region).astype(np.int64))

    @property
    def radial_symbol(self) -> np.ndarray:
        """Symbol values at the radial nodes, computed from u."""
        inner = self.region == INNER
        return np.where(inner, 1j / (2.0 * self.u), _branch / (2.0 * self.u))

    @property
    def radial_symbol_weights(self) -> np.ndarray:
        """Radial weight times symbol, evaluated without dividing by u."""
        w_u = self.radial_weights / self.u
        inner = self.region == INNER
        return np.where(inner, 0.5j * w_u, 0.5 * _branch * w_u)

    @property
    def size(self) -> int:
        return len(self.rho) * self.n_angular

    def chunks(self, chunk_size: Optional[int] = None) -> Iterator[GridChunk]:
        """Generate the 2-D nodes lazily, a block of radial nodes at a time."""
        chunk_size = chunk_size or self.chunk_size
        per_block = max(1, chunk_size // self.n_angular)
        cos, sin = np.cos(self.theta), np.sin(self.theta)
        sym_w = self.radial_symbol_weights
        for start in range(0, len(self.rho), per_block):
            stop = min(start + per_block, len(self.rho))
            rho = np.repeat(self.rho[start:stop], self.n_angular)
            xi = np.column_stack([rho * np.tile(cos, stop - start), rho * np.tile(sin, stop - start)])
            yield GridChunk(
                xi=xi,
                rho=rho,
                u=np.repeat(self.u[start:stop], self.n_angular),
                region=np.repeat(self.region[start:stop], self.n_angular),
                weights=np.repeat(self.radial_weights[start:stop], self.n_angular) * self.angular_weight,
                symbol_weights=np.repeat(sym_w[start:stop], self.n_angular) * self.angular_weight,
            )

    def integrate(self, func: Callable[[GridChunk], np.ndarray], region: Optional[int] = None) -> complex:
        """Sum of weights * func(chunk) over all nodes (optionally one radial region)."""
        total = 0.0
        for chunk in self.chunks():
            values = func(chunk)
            w = chunk.weights if region is None else np.where(chunk.region == region, chunk.weights, 0.0)
            total = total + np.sum(w * values)
        return total


def build_spectral_grid(k: float, xi_max: float, n_radial: int, n_angular: int,
                        panel_width: float = 1.0, eps_xi: float = 1e-8) -> SpectralGrid:
    """
    Build a polar spectral grid.

    Raises:
        ConfigError: if counts are not positive or xi_max <= 2k
    """
    if n_radial < 1:
        raise ConfigError(f"n_radial must be positive, got {n_radial}", field="spectral.n_radial")
    if n_angular < 1:
        raise ConfigError(f"n_angular must be positive, got {n_angular}", field="spectral.n_angular")
    if k < 0:
        raise ConfigError(f"Wavenumber must be non-negative, got {k}", field="wave.k")
    if not xi_max > 2.0 * k or xi_max <= 0:
        raise ConfigError(f"xi_max={xi_max} must exceed 2k={2.0 * k}", field="spectral.xi_max")
    if not panel_width > 0:
        raise ConfigError(f"panel_width must be positive, got {panel_width}", field="spectral.panel_width")
    return SpectralGrid(k, xi_max, n_radial, n_angular, panel_width=panel_width, eps_xi=eps_xi)


def grid_from_settings(settings: SpectralSettings, k: float, h_max: float) -> SpectralGrid:
    grid = build_spectral_grid(k, settings.resolve_xi_max(k, h_max), settings.n_radial,
                               settings.n_angular, settings.panel_width, settings.eps_xi)
    grid.chunk_size = settings.chunk_size
    return grid


def audit_branch(grid: SpectralGrid) -> bool:
    """True when Im symbol > 0 exactly inside |xi| < k and the symbol is real positive outside."""
    values = grid.radial_symbol
    inner = grid.rho < grid.k
    ok_inner = np.all((values[inner].imag > 0) & (values[inner].real == 0.0))
    ok_outer = np.all((values[~inner].real > 0) & (values[~inner].imag == 0.0))
    return bool(ok_inner and ok_outer)


def _smooth_tail(rho: np.ndarray, k: float, a: float) -> np.ndarray:
    """Asymptotic part of the symbol, Hankel-transformable in closed form."""
    r2 = rho ** 2 + a ** 2
    return 1.0 / (2.0 * np.sqrt(r2)) + (k ** 2 + a ** 2) / (4.0 * r2 ** 1.5)


def weyl_accuracy_warnings(separation: float, grid: SpectralGrid) -> List[str]:
    warnings = []
    if grid.panel_width * separation > 0.5 * math.pi * grid.n_radial:
        warnings.append(f"Radial panels too wide for separation {separation:.3g} "
                        f"(panel_width * R = {grid.panel_width * separation:.3g})")
    if grid.xi_max * separation < 10.0:
        warnings.append(f"xi_max={grid.xi_max:.3g} is small for separation {separation:.3g}")
    return warnings


def weyl_check(x, x_prime, k: float, grid: SpectralGrid) -> complex:
    """
    Spectral reconstruction of exp(ikR)/(4 pi R) at R = |x - x'| for in-plane points.

    The angular integral is done exactly (Bessel J0); the slowly decaying part
    of the symbol is subtracted and added back in closed form.

    Raises:
        SingularityError: if x == x'
    """
    sep = float(np.linalg.norm(np.asarray(x, dtype=float) - np.asarray(x_prime, dtype=float)))
    if sep == 0.0:
        raise SingularityError("Weyl reconstruction requested at coincident points")
    for message in weyl_accuracy_warnings(sep, grid):
        logging.warning(message)

    a = k if k > 0 else 1.0
    bessel = j0(grid.rho * sep)
    integrand = grid.radial_symbol_weights - grid.radial_weights * _smooth_tail(grid.rho, k, a)
    remainder = np.sum(integrand * bessel) / (2.0 * math.pi)
    closed = math.exp(-a * sep) / (4.0 * math.pi * sep) + (k ** 2 + a ** 2) * math.exp(-a * sep) / (8.0 * math.pi * a)
    return complex(remainder + closed)


# ---------------------------------------------------------------------------
# closed-form transforms of the discrete bases
# ---------------------------------------------------------------------------

_SERIES_TERMS = 14


def _phi1(z: np.ndarray) -> np.ndarray:
    """(exp(z) - 1)/z, with a Taylor series for small |z|."""
    small = np.abs(z) < 0.5
    zs = np.where(small, z, 0.0)
    series = np.zeros_like(z, dtype=complex)
    term = np.ones_like(z, dtype=complex)
    for n in range(_SERIES_TERMS):
        series += term
        term = term * zs / (n + 2)
    zl = np.where(small, 1.0, z)
    direct = (np.exp(zl) - 1.0) / zl
    return np.where(small, series, direct)


def _chi1(z: np.ndarray) -> np.ndarray:
    """Integral of t exp(z t) over [0, 1]: (exp(z)(z-1) + 1)/z^2."""
    small = np.abs(z) < 0.5
    zs = np.where(small, z, 0.0)
    series = np.zeros_like(z, dtype=complex)
    power = np.ones_like(z, dtype=complex)
    factorial = 1.0
    for n in range(_SERIES_TERMS):
        series += power / (factorial * (n + 2))
        power = power * zs
        factorial *= n + 1
    zl = np.where(small, 1.0, z)
    direct = (np.exp(zl) * (zl - 1.0) + 1.0) / zl ** 2
    return np.where(small, series, direct)


@dataclass
class CellTransforms:
    """Per-node, per-cell transforms: cell indicator and the moments of (x - v_a)."""
    chi: np.ndarray
    par: np.ndarray
    perp: np.ndarray


def _quadrature_moments(triangles: np.ndarray, xi: np.ndarray, order: int = 10):
    """Transforms by direct quadrature: chi (nx, nc) and moment vectors (nx, nc, 3, 2)."""
    points, weights = map_rule(cell_quadrature(order), triangles)
    phase = np.exp(-1j * np.einsum("xd,cqd->xcq", xi, points))
    chi = np.einsum("cq,xcq->xc", weights, phase)
    rel = points[:, None, :, :] - triangles[:, :, None, :]
    moments = np.einsum("cq,caqd,xcq->xcad", weights, rel, phase)
    return chi, moments


def _closed_form(triangles: np.ndarray, xi: np.ndarray):
    """Closed-form chi and moment projections; unstable when |xi| * diam is small."""
    a = triangles
    b = np.roll(triangles, -1, axis=1)
    vec = b - a
    length = np.linalg.norm(vec, axis=-1)
    t = vec / length[..., None]
    n = np.stack([t[..., 1], -t[..., 0]], axis=-1)
    area = 0.5 * np.abs(vec[:, 0, 0] * (-vec[:, 2, 1]) - vec[:, 0, 1] * (-vec[:, 2, 0]))

    rho = np.linalg.norm(xi, axis=-1)
    rho_safe = np.where(rho > 0, rho, 1.0)
    xa = np.einsum("xd,ced->xce", xi, a)
    xt = np.einsum("xd,ced->xce", xi, t)
    xn = np.einsum("xd,ced->xce", xi, n)
    z = -1j * length[None] * xt
    phase = np.exp(-1j * xa)
    p_edge = length[None] * phase * _phi1(z)
    q_edge = length[None] ** 2 * phase * _chi1(z)

    chi = 1j * np.sum(xn * p_edge, axis=-1) / rho_safe[:, None] ** 2

    # edge opposite vertex a runs from vertex a+1 to a+2: cell-boundary edge (a+1) % 3
    opp = [1, 2, 0]
    height = 2.0 * area[:, None] / length[:, opp]
    xi_dot_m = -1j * (2.0 * chi[:, :, None] - height[None] * p_edge[:, :, opp])

    # ((a_e - v_a) . t_e), shape (nc, e, a)
    along = np.einsum("ced,ced->ce", a, t)[:, :, None] - np.einsum("cad,ced->cea", triangles, t)
    perp_dot_m = -1j * (np.einsum("cea,xce->xca", along, p_edge) + np.sum(q_edge, axis=-1)[:, :, None])

    return chi, xi_dot_m / rho_safe[:, None, None], perp_dot_m / rho_safe[:, None, None]


def cell_transforms(triangles: np.ndarray, xi: np.ndarray, fallback: float = 0.25) -> CellTransforms:
    """
    Transforms of the cell indicators and of the RWG moments (x - v_a) on each cell,
    projected on xi^ and xi^perp. Nodes with |xi| * diam < fallback use order-10
    quadrature instead of the closed form. Requires xi != 0.
    """
    triangles = np.asarray(triangles, dtype=float)
    xi = np.atleast_2d(np.asarray(xi, dtype=float))
    chi, par, perp = _closed_form(triangles, xi)

    diam = np.max(np.linalg.norm(triangles - np.roll(triangles, -1, axis=1), axis=-1), axis=1)
    rho = np.linalg.norm(xi, axis=-1)
    low = rho[:, None] * diam[None, :] < fallback
    rows = np.flatnonzero(np.any(low, axis=1))
    if len(rows):
        q_chi, q_mom = _quadrature_moments(triangles, xi[rows])
        unit, perp_dir = unit_frames(xi[rows])
        q_par = np.einsum("xcad,xd->xca", q_mom, unit)
        q_perp = np.einsum("xcad,xd->xca", q_mom, perp_dir)
        mask = low[rows]
        chi[rows] = np.where(mask, q_chi, chi[rows])
        par[rows] = np.where(mask[..., None], q_par, par[rows])
        perp[rows] = np.where(mask[..., None], q_perp, perp[rows])
    return CellTransforms(chi=chi, par=par, perp=perp)


def rwg_moment_vectors(triangles: np.ndarray, xi: np.ndarray, fallback: float = 0.25):
    """Full moment vectors integral (x - v_a) exp(-i xi.x) dx, valid at xi = 0 too."""
    triangles = np.asarray(triangles, dtype=float)
    xi = np.atleast_2d(np.asarray(xi, dtype=float))
    diam = np.max(np.linalg.norm(triangles - np.roll(triangles, -1, axis=1), axis=-1), axis=1)
    rho = np.linalg.norm(xi, axis=-1)
    low = rho[:, None] * diam[None, :] < fallback

    moments = np.zeros((len(xi), len(triangles), 3, 2), dtype=complex)
    chi = np.zeros((len(xi), len(triangles)), dtype=complex)
    high_rows = np.flatnonzero(rho > 0)
    if len(high_rows):
        c, par, perp = _closed_form(triangles, xi[high_rows])
        unit, perp_dir = unit_frames(xi[high_rows])
        moments[high_rows] = par[..., None] * unit[:, None, None, :] + perp[..., None] * perp_dir[:, None, None, :]
        chi[high_rows] = c
    rows = np.flatnonzero(np.any(low, axis=1))
    if len(rows):
        q_chi, q_mom = _quadrature_moments(triangles, xi[rows])
        mask = low[rows]
        chi[rows] = np.where(mask, q_chi, chi[rows])
        moments[rows] = np.where(mask[..., None, None], q_mom, moments[rows])
    return chi, moments


def rwg_selection(mesh, dofs) -> sp.csr_matrix:
    """Sparse (3 n_cells x n_vector) map from local (cell, vertex) moments to dofs, with RWG scaling."""
    cell_dofs = dofs.cell_dofs().ravel()
    coef = mesh.rwg_coefficients().ravel()
    keep = cell_dofs >= 0
    rows = np.arange(3 * mesh.n_cells)[keep]
    return sp.csr_matrix((coef[keep], (rows, cell_dofs[keep])), shape=(3 * mesh.n_cells, dofs.n_vector))


def vector_components(mesh, dofs, xi: np.ndarray, selection: Optional[sp.csr_matrix] = None):
    """Helmholtz components (a1, a2) of every edge basis function, each (n_xi, n_vector)."""
    selection = rwg_selection(mesh, dofs) if selection is None else selection
    tr = cell_transforms(mesh.triangles, xi)
    nx = len(tr.par)
    a1 = (selection.T @ tr.par.reshape(nx, -1).T).T
    a2 = (selection.T @ tr.perp.reshape(nx, -1).T).T
    return np.asarray(a1), np.asarray(a2)


def multiplier_transforms(mesh, dofs, xi: np.ndarray, curl: Optional[sp.csr_matrix] = None,
                          a2: Optional[np.ndarray] = None) -> np.ndarray:
    """Transforms of the interior hat functions, q^ = a2(curl q) / (i |xi|)."""
    curl = dofs.curl_matrix() if curl is None else curl
    if a2 is None:
        _, a2 = vector_components(mesh, dofs, xi)
    rho = np.linalg.norm(np.atleast_2d(xi), axis=-1)
    return np.asarray((curl.T @ a2.T).T) / (1j * rho[:, None])


def density_transform(mesh, coefficients: np.ndarray, xi: np.ndarray) -> np.ndarray:
    """Transform of a piecewise-constant density."""
    return cell_transforms(mesh.triangles, xi).chi @ np.asarray(coefficients)


def vector_density_transform(mesh, dofs, coefficients: np.ndarray, xi: np.ndarray) -> np.ndarray:
    """Full transform W^(xi), shape (n_xi, 2), of an edge-basis field; xi = 0 allowed."""
    _, moments = rwg_moment_vectors(mesh.triangles, xi)
    local = np.zeros(3 * mesh.n_cells, dtype=complex)
    local[:] = rwg_selection(mesh, dofs) @ np.asarray(coefficients, dtype=complex)
    return np.einsum("xcad,ca->xd", moments, local.reshape(-1, 3))


def sobolev_weight(rho: np.ndarray, s: float) -> np.ndarray:
    return (1.0 + rho ** 2) ** s


def _hermitian(gram: np.ndarray) -> np.ndarray:
    return 0.5 * (gram + gram.conj().T)


def spectral_gram(grid: SpectralGrid,
                  blocks: Callable[[GridChunk], Sequence[Tuple[np.ndarray, np.ndarray]]]) -> np.ndarray:
    """
    Hermitian Gram matrix (1/4pi^2) sum_nodes w * sum_b weight_b conj(F_b)^T F_b.

    Args:
        grid: spectral grid
        blocks: maps a chunk to pairs (F (n_nodes x n_basis), nodal weight factor)
    """
    gram = None
    for chunk in grid.chunks():
        for values, factor in blocks(chunk):
            scaled = values * (chunk.weights * factor)[:, None]
            part = values.conj().T @ scaled
            gram = part if gram is None else gram + part
    return _hermitian(INVERSE_PREFACTOR * gram)


def scalar_norm_gram(mesh, grid: SpectralGrid, s: float = -0.5) -> np.ndarray:
    """Gram of the piecewise-constant basis in the H~^s norm."""
    def blocks(chunk):
        chi = cell_transforms(mesh.triangles, chunk.xi).chi
        return [(chi, sobolev_weight(chunk.rho, s))]
    return spectral_gram(grid, blocks)


def norm_grams(mesh, dofs, grid: SpectralGrid, multiplier_orders: Sequence[float] = ()):
    """
    Edge-basis Grams in the H (= H~^-1/2) and X norms, and multiplier Grams in
    H~^s for each s in multiplier_orders, from a single pass over the grid.

    Returns:
        (h_gram, x_gram, {s: multiplier gram})
    """
    selection = rwg_selection(mesh, dofs)
    curl = dofs.curl_matrix()
    h_gram, div_gram = 0.0, 0.0
    mult = {s: 0.0 for s in multiplier_orders}
    for chunk in grid.chunks():
        a1, a2 = vector_components(mesh, dofs, chunk.xi, selection)
        base = INVERSE_PREFACTOR * chunk.weights
        w = base * sobolev_weight(chunk.rho, -0.5)
        h_gram = h_gram + a1.conj().T @ (a1 * w[:, None]) + a2.conj().T @ (a2 * w[:, None])
        div_gram = div_gram + a1.conj().T @ (a1 * (w * chunk.rho ** 2)[:, None])
        if mult:
            q_hat = multiplier_transforms(mesh, dofs, chunk.xi, curl, a2)
            for s in mult:
                mult[s] = mult[s] + q_hat.conj().T @ (q_hat * (base * sobolev_weight(chunk.rho, s))[:, None])
    h_gram = _hermitian(h_gram)
    x_gram = h_gram + _hermitian(div_gram)
    return h_gram, x_gram, {s: _hermitian(g) for s, g in mult.items()}


def spectral_distance(transform_a: Callable[[np.ndarray], np.ndarray],
                      transform_b: Callable[[np.ndarray], np.ndarray],
                      grid: SpectralGrid, s: float = -0.5) -> float:
    """H~^s distance between two fields given by their transforms (possibly on different meshes)."""
    total = 0.0
    for chunk in grid.chunks():
        diff = transform_a(chunk.xi) - transform_b(chunk.xi)
        power = np.abs(diff) ** 2
        if power.ndim > 1:
            power = power.sum(axis=-1)
        total += float(np.sum(chunk.weights * sobolev_weight(chunk.rho, s) * power))
    return math.sqrt(INVERSE_PREFACTOR * total)


# ---------------------------------------------------------------------------
# zero-padded Cartesian fields
# ---------------------------------------------------------------------------

@dataclass
class CartesianField:
    """Samples on a uniform square grid; support is the index block (i0, i1, j0, j1) of the unpadded data."""
    values: np.ndarray
    spacing: float
    origin: Tuple[float, float]
    support: Tuple[int, int, int, int]

    @classmethod
    def padded(cls, samples: np.ndarray, spacing: float, pad: int = 4,
               origin: Tuple[float, float] = (0.0, 0.0)) -> 'CartesianField':
        """Embed samples (origin = coordinate of samples[0, 0]) centred in a grid pad times larger."""
        samples = np.asarray(samples, dtype=complex)
        n1, n2 = samples.shape
        size = int(pad) * max(n1, n2)
        i0, j0 = (size - n1) // 2, (size - n2) // 2
        values = np.zeros((size, size), dtype=complex)
        values[i0:i0 + n1, j0:j0 + n2] = samples
        grid_origin = (origin[0] - i0 * spacing, origin[1] - j0 * spacing)
        return cls(values=values, spacing=float(spacing), origin=grid_origin, support=(i0, i0 + n1, j0, j0 + n2))

    @property
    def pad(self) -> float:
        i0, i1, j0, j1 = self.support
        return min(self.values.shape[0] / max(i1 - i0, 1), self.values.shape[1] / max(j1 - j0, 1))

    def coordinates(self) -> Tuple[np.ndarray, np.ndarray]:
        n1, n2 = self.values.shape
        return (self.origin[0] + self.spacing * np.arange(n1), self.origin[1] + self.spacing * np.arange(n2))

    def outside_support(self) -> np.ndarray:
        i0, i1, j0, j1 = self.support
        mask = np.ones(self.values.shape, dtype=bool)
        mask[i0:i1, j0:j1] = False
        return self.values[mask]

    def with_values(self, values: np.ndarray) -> 'CartesianField':
        return CartesianField(values=values, spacing=self.spacing, origin=self.origin, support=self.support)


def frequencies(field: CartesianField) -> Tuple[np.ndarray, np.ndarray]:
    n1, n2 = field.values.shape
    return (2.0 * math.pi * np.fft.fftfreq(n1, d=field.spacing),
            2.0 * math.pi * np.fft.fftfreq(n2, d=field.spacing))


def forward_transform(field: CartesianField) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Discrete transform under the fixed convention: returns (xi1, xi2, f^) on the FFT grid."""
    xi1, xi2 = frequencies(field)
    shift = np.exp(-1j * (xi1[:, None] * field.origin[0] + xi2[None, :] * field.origin[1]))
    return xi1, xi2, field.spacing ** 2 * np.fft.fft2(field.values) * shift


def inverse_transform(f_hat: np.ndarray, template: CartesianField) -> CartesianField:
    xi1, xi2 = frequencies(template)
    shift = np.exp(1j * (xi1[:, None] * template.origin[0] + xi2[None, :] * template.origin[1]))
    values = np.fft.ifft2(f_hat * shift) / template.spacing ** 2
    return template.with_values(values)


def sobolev_norm(field: CartesianField, s: float) -> float:
    """
    Discrete H~^s norm: sqrt((1/4pi^2) sum (1+|xi|^2)^s |f^|^2 dxi^2).

    Raises:
        ConfigError: if s is not -1/2, 0 or 1/2, the padding factor is below 4,
            or the field is nonzero outside its support block
    """
    if s not in (-0.5, 0.0, 0.5):
        raise ConfigError(f"Sobolev exponent must be -1/2, 0 or 1/2, got {s}", field="s")
    if field.pad < 4:
        raise ConfigError(f"Padding factor {field.pad:.2f} is below 4; the fractional weight would alias",
                          field="pad")
    if np.any(field.outside_support() != 0):
        raise ConfigError("Field is nonzero outside its support block", field="support")
    xi1, xi2, f_hat = forward_transform(field)
    n1, n2 = field.values.shape
    d_area = (2.0 * math.pi / (n1 * field.spacing)) * (2.0 * math.pi / (n2 * field.spacing))
    rho2 = xi1[:, None] ** 2 + xi2[None, :] ** 2
    total = np.sum((1.0 + rho2) ** s * np.abs(f_hat) ** 2) * d_area
    return math.sqrt(INVERSE_PREFACTOR * float(total))


def cartesian_div(fx: CartesianField, fy: CartesianField) -> CartesianField:
    """Central-difference divergence; values beyond the grid are taken as zero."""
    h = fx.spacing
    px = np.pad(fx.values, 1)
    py = np.pad(fy.values, 1)
    div = (px[2:, 1:-1] - px[:-2, 1:-1]) / (2.0 * h) + (py[1:-1, 2:] - py[1:-1, :-2]) / (2.0 * h)
    i0, i1, j0, j1 = fx.support
    support = (max(i0 - 1, 0), i1 + 1, max(j0 - 1, 0), j1 + 1)
    return CartesianField(values=div, spacing=h, origin=fx.origin, support=support)


def locate_points(mesh, points: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Containing cell and barycentric coordinates of each point (-1 outside the mesh)."""
    cells = -np.ones(len(points), dtype=np.int64)
    bary = np.zeros((len(points), 3))
    tri = mesh.triangles
    lo, hi = tri.min(axis=1), tri.max(axis=1)
    for c in range(mesh.n_cells):
        cand = np.flatnonzero(np.all((points >= lo[c] - 1e-14) & (points <= hi[c] + 1e-14), axis=1) & (cells < 0))
        if not len(cand):
            continue
        a, b, d = tri[c]
        mat = np.column_stack([b - a, d - a])
        lam = np.linalg.solve(mat, (points[cand] - a).T).T
        l0 = 1.0 - lam.sum(axis=1)
        inside = (lam[:, 0] >= -1e-14) & (lam[:, 1] >= -1e-14) & (l0 >= -1e-14)
        hit = cand[inside]
        cells[hit] = c
        bary[hit] = np.column_stack([l0[inside], lam[inside]])
    return cells, bary


def _raster_points(mesh, spacing: float, sub: int):
    lo, hi = mesh.extent()
    n1 = int(math.ceil((hi[0] - lo[0]) / spacing)) + 1
    n2 = int(math.ceil((hi[1] - lo[1]) / spacing)) + 1
    n = max(n1, n2)
    centre = 0.5 * (lo + hi)
    origin = centre - 0.5 * (n - 1) * spacing
    offsets = ((np.arange(sub) + 0.5) / sub - 0.5) * spacing
    fine_x = (origin[0] + spacing * np.arange(n)[:, None] + offsets[None, :]).ravel()
    fine_y = (origin[1] + spacing * np.arange(n)[:, None] + offsets[None, :]).ravel()
    px, py = np.meshgrid(fine_x, fine_y, indexing="ij")
    points = np.column_stack([px.ravel(), py.ravel()])
    return n, (float(origin[0]), float(origin[1])), points


def rasterize_cells(mesh, values: np.ndarray, spacing: float, pad: int = 4, sub: int = 4) -> CartesianField:
    """Cell-averaged sampling of a piecewise-constant density onto a padded grid."""
    n, origin, points = _raster_points(mesh, spacing, sub)
    cells, _ = locate_points(mesh, points)
    samples = np.where(cells >= 0, np.asarray(values, dtype=complex)[np.maximum(cells, 0)], 0.0)
    averaged = samples.reshape(n, sub, n, sub).mean(axis=(1, 3))
    return CartesianField.padded(averaged, spacing, pad=pad, origin=origin)


def rasterize_edges(mesh, dofs, coefficients: np.ndarray, spacing: float, pad: int = 4,
                    sub: int = 4) -> Tuple[CartesianField, CartesianField]:
    """Cell-averaged sampling of an edge-basis field; returns the two Cartesian components."""
    n, origin, points = _raster_points(mesh, spacing, sub)
    cells, _ = locate_points(mesh, points)
    local = (rwg_selection(mesh, dofs) @ np.asarray(coefficients, dtype=complex)).reshape(-1, 3)
    inside = cells >= 0
    c = np.maximum(cells, 0)
    rel = points[:, None, :] - mesh.triangles[c]
    vec = np.einsum("pa,pad->pd", local[c], rel)
    vec[~inside] = 0.0
    comps = []
    for d in range(2):
        averaged = vec[:, d].reshape(n, sub, n, sub).mean(axis=(1, 3))
        comps.append(CartesianField.padded(averaged, spacing, pad=pad, origin=origin))
    return comps[0], comps[1]


def low_frequency_xi(grid: SpectralGrid) -> np.ndarray:
    """All grid nodes with |xi| <= 2k (the inner and near radial regions)."""
    parts = [chunk.xi[chunk.region != FAR] for chunk in grid.chunks()]
    parts = [p for p in parts if len(p)]
    return np.concatenate(parts) if parts else np.zeros((0, 2))


def low_frequency_bound(values: np.ndarray, gram: np.ndarray, samples: Optional[np.ndarray] = None,
                        block: int = 512) -> Tuple[float, float]:
    """
    Bounds on max |f^(xi)| / ||f|| over the given nodes.

    Args:
        values: basis transforms at the nodes, shape (n_nodes, n_basis) or (n_nodes, d, n_basis)
        gram: Hermitian positive definite Gram of the norm ||f||
        samples: optional coefficient vectors (n_samples, n_basis)

    Returns:
        (discrete supremum over all unit-norm f, maximum over the samples)
    """
    values = np.asarray(values)
    if values.ndim == 2:
        values = values[:, None, :]
    n_nodes, d, n_basis = values.shape
    if n_nodes == 0 or n_basis == 0:
        return 0.0, 0.0
    factor = scipy.linalg.cho_factor(gram)
    sup = 0.0
    for start in range(0, n_nodes, block):
        part = values[start:start + block]
        flat = part.reshape(-1, n_basis)
        solved = scipy.linalg.cho_solve(factor, flat.conj().T).T.reshape(part.shape)
        local = np.einsum("ndb,neb->nde", part, solved)
        top = np.linalg.eigvalsh(0.5 * (local + np.conj(np.swapaxes(local, 1, 2))))[:, -1]
        sup = max(sup, float(np.sqrt(max(np.max(top), 0.0))))

    sample_max = 0.0
    if samples is not None and len(samples):
        norms = np.sqrt(np.real(np.einsum("sb,bc,sc->s", samples.conj(), gram, samples)))
        transformed = np.einsum("ndb,sb->snd", values, samples)
        peaks = np.max(np.linalg.norm(transformed, axis=-1), axis=1)
        sample_max = float(np.max(peaks / norms))
    return sup, sample_max
