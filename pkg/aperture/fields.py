#!/usr/bin/env python3
"""
fields.py - Scattered fields, far field, transmitted power and physics residuals

With A = int g W and Phi = int g div W (eps = mu = 1, time factor exp(-iwt)):

    H^s = s 2ik (A + grad Phi / k^2),   E^s = (i/k) curl H^s = -2 s int grad g x W,

with s = -1 above the screen and s = +1 below it. On the aperture e3 x E^s
tends to W from either side.
"""

import logging
import math
import time
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from .errors import ConfigError, SingularityError
from .geometry import screen_ring
from .greens import dyadic_G2_minus, dyadic_G2_plus
from .parallel import run_chunks
from .potentials import TargetSweep
from .quadrature import cell_quadrature, gauss_legendre, map_rule
from .reports import SolveReport
from .scalar_bie import ScalarDensity, ScalarFieldEvaluator, ScalarWave, incident_scalar
from .spectra import locate_points, rwg_selection
from .vector_bie import IMAGE, VectorDensity, WaveContext, incident_fields

CSV_HEADER = "x,y,z,Re Ex,Im Ex,Re Ey,Im Ey,Re Ez,Im Ez,Re Hx,Im Hx,Re Hy,Im Hy,Re Hz,Im Hz"


@dataclass
class FieldSample:
    """Scattered fields at one point; region is 'upper' or 'lower'."""
    position: np.ndarray
    E: np.ndarray
    H: np.ndarray
    region: str

    def __post_init__(self):
        z = float(self.position[2])
        if (z > 0 and self.region != "upper") or (z < 0 and self.region != "lower"):
            raise ConfigError(f"Region tag '{self.region}' inconsistent with z={z}", field="region")


@dataclass
class PowerReport:
    """
    Transmitted power through the aperture.

    tau is the transmitted power divided by the incident flux through the
    aperture area, (1/2) |E^i x conj(H^i)| Area.
    """
    incident_flux: float
    aperture_power: float
    far_field_power: float
    tau: float
    tau_far_field: float
    relative_difference: float
    agree: bool
    aperture_power_galerkin: Optional[float] = None
    warnings: List[str] = field(default_factory=list)

    def to_dict(self) -> Dict:
        return asdict(self)


class FieldEvaluator:
    """Scattered electromagnetic field of a solved aperture density."""

    def __init__(self, density: VectorDensity, near_order: int = 6, far_order: int = 4,
                 threads: Optional[int] = None, chunk_size: int = 64):
        self.density = density
        self.mesh = density.mesh
        self.k = density.k
        self.near_order = near_order
        self.far_order = far_order
        self.threads = threads
        self.chunk_size = chunk_size
        local = (rwg_selection(self.mesh, density.dofs) @ density.coefficients).reshape(-1, 3)
        # W = s x - vbar on each cell, div W = 2 s
        self._s = local.sum(axis=1)
        self._vbar = np.einsum("ca,cad->cd", local, self.mesh.triangles)

    @staticmethod
    def _side_array(points: np.ndarray, side) -> Optional[np.ndarray]:
        if side is None:
            if np.any(points[:, 2] == 0.0):
                raise SingularityError("On-plane evaluation needs a side (+1 upper, -1 lower)")
            return None
        return np.broadcast_to(np.asarray(side, dtype=float), (len(points),)).copy()

    def _moments(self, points: np.ndarray, side: Optional[np.ndarray]):
        """A (m, 3), grad Phi (m, 3) and int grad g x W (m, 3)."""
        n = len(points)
        a_vec = np.zeros((n, 3), dtype=complex)
        grad_phi = np.zeros((n, 3), dtype=complex)
        curl_int = np.zeros((n, 3), dtype=complex)

        def work(start, stop):
            x = points[start:stop, :2]
            sweep = TargetSweep(self.mesh, x, points[start:stop, 2],
                                None if side is None else side[start:stop],
                                near_order=self.near_order, far_order=self.far_order)
            for c in range(self.mesh.n_cells):
                s, vbar = self._s[c], self._vbar[c]
                if s == 0 and not np.any(vbar):
                    continue
                p0, p1, g0, q = sweep.cell(c, self.k)
                offset = s * x - vbar
                a_vec[start:stop, :2] += s * p1 + offset * p0[:, None]
                grad_phi[start:stop] += 2.0 * s * g0
                offset3 = np.column_stack([offset, np.zeros(len(x))])
                curl_int[start:stop] += s * q + np.cross(g0, offset3)

        run_chunks(work, n, self.chunk_size, self.threads)
        return a_vec, grad_phi, curl_int

    def density_at(self, x) -> np.ndarray:
        """W at in-plane points inside the aperture (zero outside), shape (m, 2)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        cells, _ = locate_points(self.mesh, x)
        c = np.maximum(cells, 0)
        values = self._s[c][:, None] * x - self._vbar[c]
        values[cells < 0] = 0.0
        return values

    def _signs(self, points: np.ndarray, side: Optional[np.ndarray]) -> np.ndarray:
        upper = points[:, 2] > 0
        if side is not None:
            upper = np.where(points[:, 2] == 0.0, side > 0, upper)
        return np.where(upper, -1.0, 1.0)[:, None]

    def evaluate(self, points, side=None):
        """(E^s, H^s) at points (m, 3)."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        side = self._side_array(points, side)
        a_vec, grad_phi, curl_int = self._moments(points, side)
        sign = self._signs(points, side)
        h_s = sign * 2j * self.k * (a_vec + grad_phi / self.k ** 2)
        e_s = -2.0 * sign * curl_int
        return e_s, h_s

    def eval_Hs(self, points, side=None) -> np.ndarray:
        return self.evaluate(points, side)[1]

    def eval_Es(self, points, side=None) -> np.ndarray:
        return self.evaluate(points, side)[0]

    def samples(self, points, side=None) -> List[FieldSample]:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        e_s, h_s = self.evaluate(points, side)
        regions = np.where(self._signs(points, self._side_array(points, side))[:, 0] < 0, "upper", "lower")
        return [FieldSample(position=p, E=e, H=h, region=str(r)) for p, e, h, r in zip(points, e_s, h_s, regions)]

    def eval_Hs_dyadic(self, points, order: int = 8) -> np.ndarray:
        """
        H^s by plain quadrature of the half-space dyadics: -ik int G2+ W above,
        ik P int G2- W below (P = diag(1, 1, -1)). For points well off the plane.
        """
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if np.any(np.abs(points[:, 2]) < self.mesh.h_max):
            raise SingularityError("Dyadic quadrature route needs |z| >= h_max")
        quad_pts, quad_w = map_rule(cell_quadrature(order), self.mesh.triangles)
        w_vals = self._s[:, None, None] * quad_pts - self._vbar[:, None, :]
        sources = np.concatenate([quad_pts.reshape(-1, 2), np.zeros((quad_pts[..., 0].size, 1))], axis=1)
        dens = np.concatenate([(w_vals * quad_w[..., None]).reshape(-1, 2),
                               np.zeros((quad_pts[..., 0].size, 1))], axis=1)
        out = np.zeros((len(points), 3), dtype=complex)
        diameter = self.mesh.diameter()
        for i, r in enumerate(points):
            if r[2] > 0:
                kernel = dyadic_G2_plus(r[None, :], sources, self.k, diameter)
                out[i] = -1j * self.k * np.einsum("qij,qj->i", kernel, dens)
            else:
                kernel = dyadic_G2_minus(r[None, :], sources, self.k, diameter)
                out[i] = IMAGE * (1j * self.k * np.einsum("qij,qj->i", kernel, dens))
        return out

    def far_field(self, directions) -> np.ndarray:
        """
        Far-field amplitude F with H^s ~ exp(ikr)/r F(r^) in the lower half-space.

        Raises:
            ConfigError: for directions that are not unit vectors with r3 < 0
        """
        directions = np.atleast_2d(np.asarray(directions, dtype=float))
        if np.any(np.abs(np.linalg.norm(directions, axis=1) - 1.0) > 1e-10):
            raise ConfigError("Far-field directions must be unit vectors", field="direction")
        if np.any(directions[:, 2] >= 0):
            raise ConfigError("Far field is defined for the lower half-space only (r3 < 0)", field="direction")
        w_hat = self.density.transform(self.k * directions[:, :2])
        w3 = np.concatenate([w_hat, np.zeros((len(directions), 1))], axis=1)
        transverse = w3 - directions * np.sum(directions * w3, axis=1, keepdims=True)
        return (1j * self.k / (2.0 * math.pi)) * transverse


def far_field_power(evaluator: FieldEvaluator, n_u: int = 24, n_phi: int = 64) -> float:
    """(1/2) int |F|^2 over the lower hemisphere, in the variable u = k |cos theta|."""
    k = evaluator.k
    u, wu = gauss_legendre(n_u, 0.0, k)
    phi = 2.0 * math.pi * (np.arange(n_phi) + 0.5) / n_phi
    uu, pp = np.meshgrid(u, phi, indexing="ij")
    sin_t = np.sqrt(np.maximum(1.0 - (uu / k) ** 2, 0.0))
    directions = np.stack([sin_t * np.cos(pp), sin_t * np.sin(pp), -uu / k], axis=-1).reshape(-1, 3)
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    power = np.sum(np.abs(evaluator.far_field(directions)) ** 2, axis=1).reshape(n_u, n_phi)
    integral = np.sum(wu[:, None] * power) * (2.0 * math.pi / n_phi)
    return float(integral / (2.0 * k))


def transmission(density: VectorDensity, wave: WaveContext, b_matrix: Optional[np.ndarray] = None,
                 n_u: int = 24, n_phi: int = 64, tolerance: float = 0.02, flux_order: int = 4,
                 evaluator: Optional[FieldEvaluator] = None) -> PowerReport:
    """
    Transmitted power from the Poynting flux through the aperture and from the
    far field, and the transmission coefficient tau.

    The aperture route integrates the lower-side fields pointwise over the mesh,
    the far-field route integrates |F|^2 over the lower hemisphere. When b_matrix
    is given the Galerkin identity P = -Im(w* B w)/k is reported alongside; it
    agrees with the far-field route to quadrature accuracy and is not a check.

    Raises:
        ConfigError: if the incident field vanishes (tau undefined)
    """
    start_time = time.time()
    if wave.amplitude == 0:
        raise ConfigError("Zero incident field: transmission coefficient is undefined", field="wave.amplitude")
    evaluator = evaluator or FieldEvaluator(density)
    incident_flux = 0.5 * wave.amplitude ** 2 * density.mesh.total_area()
    aperture_power = aperture_flux_pointwise(evaluator, flux_order)
    far_power = far_field_power(evaluator, n_u, n_phi)
    scale = max(abs(aperture_power), abs(far_power), 1e-300)
    rel = abs(aperture_power - far_power) / scale
    warnings = []
    if rel > tolerance:
        message = f"Aperture and far-field powers disagree by {100 * rel:.2f}% (tolerance {100 * tolerance:.1f}%)"
        logging.warning(message)
        warnings.append(message)
    if min(aperture_power, far_power) < 0:
        message = f"Negative transmitted power (aperture {aperture_power:.3e}, far field {far_power:.3e})"
        logging.warning(message)
        warnings.append(message)

    galerkin = None
    if b_matrix is not None:
        w = density.coefficients
        galerkin = float(-np.imag(np.conj(w) @ (b_matrix @ w)) / wave.k)

    logging.info(f"Transmission computed in {time.time() - start_time:.2f} seconds")
    return PowerReport(incident_flux=incident_flux, aperture_power=aperture_power, far_field_power=far_power,
                       tau=aperture_power / incident_flux, tau_far_field=far_power / incident_flux,
                       relative_difference=rel, agree=rel <= tolerance,
                       aperture_power_galerkin=galerkin, warnings=warnings)


def aperture_flux_pointwise(evaluator: FieldEvaluator, order: int = 4) -> float:
    """(1/2) Re int (E x conj H).(-e3) on the lower side of the aperture, by cell quadrature."""
    mesh = evaluator.mesh
    pts, wts = map_rule(cell_quadrature(order), mesh.triangles)
    flat = pts.reshape(-1, 2)
    points = np.column_stack([flat, np.zeros(len(flat))])
    e_s, h_s = evaluator.evaluate(points, side=-1.0)
    poynting = np.cross(e_s, np.conj(h_s))[:, 2]
    return float(-0.5 * np.real(np.sum(wts.ravel() * poynting)))


def silver_mueller(evaluator: FieldEvaluator, direction, kr_values: Sequence[float]) -> List[float]:
    """r |H^s x r^ - E^s| along a ray in the lower half-space, one value per kr."""
    direction = np.asarray(direction, dtype=float)
    direction = direction / np.linalg.norm(direction)
    if not direction[2] < 0:
        raise ConfigError("Radiation ray must point into the lower half-space", field="samples.ray")
    radii = np.asarray(kr_values, dtype=float) / evaluator.k
    e_s, h_s = evaluator.evaluate(radii[:, None] * direction[None, :])
    defect = np.cross(h_s, np.broadcast_to(direction, h_s.shape)) - e_s
    return (radii * np.linalg.norm(defect, axis=1)).tolist()


# ---------------------------------------------------------------------------
# residual suite
# ---------------------------------------------------------------------------

@dataclass
class SamplePlan:
    """Where the residual suite samples the fields."""
    n_aperture: int = 16
    n_screen: int = 16
    offset: float = 0.5
    screen_margin: float = 0.1
    fd_step: float = 1e-3
    ray_kr: Sequence[float] = (50.0, 100.0)
    ray: Sequence[float] = (0.3, 0.2, -0.93)


def aperture_points(mesh, n: int) -> np.ndarray:
    """Cell centroids nearest to a golden-angle spiral over the inner aperture."""
    lo, hi = mesh.extent()
    centre = 0.5 * (lo + hi)
    radius = 0.35 * float(np.min(hi - lo))
    index = np.arange(n) + 0.5
    angle = index * math.pi * (3.0 - math.sqrt(5.0))
    spiral = centre + radius * np.sqrt(index / n)[:, None] * np.column_stack([np.cos(angle), np.sin(angle)])
    centroids = mesh.centroids
    nearest = np.argmin(np.linalg.norm(spiral[:, None, :] - centroids[None, :, :], axis=-1), axis=1)
    return centroids[np.unique(nearest)]


def screen_points(mesh, plan: SamplePlan) -> np.ndarray:
    if mesh.spec is None:
        raise ConfigError("Screen samples need the aperture description of the mesh", field="aperture")
    return screen_ring(mesh.spec, plan.n_screen, plan.screen_margin * mesh.diameter())


def _off_plane_points(mesh, plan: SamplePlan) -> np.ndarray:
    lo, hi = mesh.extent()
    centre = 0.5 * (lo + hi)
    z = plan.offset * mesh.diameter()
    shifts = 0.25 * mesh.diameter() * np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    planar = centre + shifts
    return np.vstack([np.column_stack([planar, np.full(3, z)]), np.column_stack([planar, np.full(3, -z)])])


def _fd_stencil(points: np.ndarray, step: float) -> np.ndarray:
    """Points followed by +-step shifts along each axis: shape (7 m, 3)."""
    shifts = [np.zeros(3)]
    for axis in range(3):
        for sign in (1.0, -1.0):
            s = np.zeros(3)
            s[axis] = sign * step
            shifts.append(s)
    return np.concatenate([points + s for s in shifts])


def _fd_curl(values: np.ndarray, m: int, step: float) -> np.ndarray:
    """Central-difference curl from values on a _fd_stencil (7 m, 3)."""
    blocks = values.reshape(7, m, 3)
    jac = np.stack([(blocks[1 + 2 * a] - blocks[2 + 2 * a]) / (2.0 * step) for a in range(3)])
    return np.stack([jac[1, :, 2] - jac[2, :, 1], jac[2, :, 0] - jac[0, :, 2], jac[0, :, 1] - jac[1, :, 0]], axis=1)


def _fd_laplacian(values: np.ndarray, m: int, step: float) -> np.ndarray:
    blocks = values.reshape(7, m)
    return (np.sum(blocks[1:], axis=0) - 6.0 * blocks[0]) / step ** 2


def _vector_residuals(evaluator: FieldEvaluator, wave: WaveContext, plan: SamplePlan) -> Dict[str, float]:
    mesh = evaluator.mesh
    amp = max(abs(wave.amplitude), 1e-300)
    k = evaluator.k
    out: Dict[str, float] = {}

    screen = screen_points(mesh, plan)
    screen3 = np.column_stack([screen, np.zeros(len(screen))])
    e_i, h_i, e_r, h_r = incident_fields(wave, screen3)
    e_up, h_up = evaluator.evaluate(screen3, side=1.0)
    e_dn, h_dn = evaluator.evaluate(screen3, side=-1.0)
    total_e_up, total_h_up = e_i + e_r + e_up, h_i + h_r + h_up
    out["screen_tangential_E"] = float(max(np.max(np.linalg.norm(total_e_up[:, :2], axis=1)),
                                           np.max(np.linalg.norm(e_dn[:, :2], axis=1))) / amp)
    out["screen_normal_H"] = float(max(np.max(np.abs(total_h_up[:, 2])), np.max(np.abs(h_dn[:, 2]))) / amp)

    ap = aperture_points(mesh, plan.n_aperture)
    ap3 = np.column_stack([ap, np.zeros(len(ap))])
    _, h_i, _, h_r = incident_fields(wave, ap3)
    e_up, h_up = evaluator.evaluate(ap3, side=1.0)
    e_dn, h_dn = evaluator.evaluate(ap3, side=-1.0)
    jump = (h_i + h_r + h_up)[:, :2] - h_dn[:, :2]
    drive = np.max(np.linalg.norm((h_i + h_r)[:, :2], axis=1))
    out["aperture_continuity_H"] = float(np.max(np.linalg.norm(jump, axis=1)) / max(drive, 1e-300))

    w_local = evaluator.density_at(ap)
    trace_up = np.stack([-e_up[:, 1], e_up[:, 0]], axis=1)
    trace_dn = np.stack([-e_dn[:, 1], e_dn[:, 0]], axis=1)
    w_scale = max(float(np.max(np.linalg.norm(w_local, axis=1))), 1e-300)
    out["aperture_trace_E"] = float(max(np.max(np.linalg.norm(trace_up - w_local, axis=1)),
                                        np.max(np.linalg.norm(trace_dn - w_local, axis=1))) / w_scale)

    off = _off_plane_points(mesh, plan)
    step = plan.fd_step * mesh.diameter()
    e_all, h_all = evaluator.evaluate(_fd_stencil(off, step))
    m = len(off)
    e0, h0 = e_all[:m], h_all[:m]
    scale = max(float(np.max(np.linalg.norm(e0, axis=1))), 1e-300) * k
    out["maxwell_curl_H"] = float(np.max(np.linalg.norm(_fd_curl(h_all, m, step) + 1j * k * e0, axis=1)) / scale)
    out["maxwell_curl_E"] = float(np.max(np.linalg.norm(_fd_curl(e_all, m, step) - 1j * k * h0, axis=1)) / scale)

    sm = silver_mueller(evaluator, plan.ray, plan.ray_kr)
    for kr, value in zip(plan.ray_kr, sm):
        out[f"silver_mueller_kr{kr:g}"] = float(value)
    return out


def _scalar_residuals(evaluator: ScalarFieldEvaluator, wave: ScalarWave, plan: SamplePlan) -> Dict[str, float]:
    mesh = evaluator.mesh
    amp = max(abs(wave.amplitude), 1e-300)
    out: Dict[str, float] = {}

    screen = screen_points(mesh, plan)
    screen3 = np.column_stack([screen, np.zeros(len(screen))])
    up = evaluator.normal_derivative(screen3, side=1.0)
    down = evaluator.normal_derivative(screen3, side=-1.0)
    out["screen_neumann"] = float(max(np.max(np.abs(up)), np.max(np.abs(down))) / amp)

    ap = aperture_points(mesh, plan.n_aperture)
    ap3 = np.column_stack([ap, np.zeros(len(ap))])
    u_i, u_r = incident_scalar(wave, ap3)
    jump = u_i + u_r + evaluator.evaluate(ap3, side=1.0) - evaluator.evaluate(ap3, side=-1.0)
    out["aperture_continuity_u"] = float(np.max(np.abs(jump)) / amp)

    if wave.k > 0:
        off = _off_plane_points(mesh, plan)
        step = plan.fd_step * mesh.diameter()
        values = evaluator.evaluate(_fd_stencil(off, step))
        m = len(off)
        lap = _fd_laplacian(values, m, step)
        scale = max(float(np.max(np.abs(values[:m]))), 1e-300) * wave.k ** 2
        out["helmholtz"] = float(np.max(np.abs(lap + wave.k ** 2 * values[:m])) / scale)
    return out


def residual_suite(density, wave, plan: Optional[SamplePlan] = None,
                   evaluator=None) -> SolveReport:
    """
    Boundary-condition, continuity, finite-difference and radiation residuals of a
    solved density, attached to its solve report under extra['residuals'].
    """
    start_time = time.time()
    plan = plan or SamplePlan()
    if isinstance(density, VectorDensity):
        evaluator = evaluator or FieldEvaluator(density)
        residuals = _vector_residuals(evaluator, wave, plan)
    elif isinstance(density, ScalarDensity):
        evaluator = evaluator or ScalarFieldEvaluator(density)
        residuals = _scalar_residuals(evaluator, wave, plan)
    else:
        raise ConfigError(f"Unsupported density type {type(density).__name__}", field="problem")

    report = density.report or SolveReport(residual=float("nan"), condition=float("nan"),
                                           sigma_min=float("nan"), n_unknowns=len(density.coefficients))
    report.extra["residuals"] = residuals
    bad = [name for name, value in residuals.items() if not np.isfinite(value)]
    if bad:
        report.merge_warnings([f"Non-finite residuals: {bad}"])
    logging.info(f"Residual suite ({len(residuals)} checks) done in {time.time() - start_time:.2f} seconds")
    return report


# ---------------------------------------------------------------------------
# field maps
# ---------------------------------------------------------------------------

def map_points(z: float, extent: float, n: int) -> np.ndarray:
    """n x n grid of points on the plane r3 = z covering [-extent, extent]^2."""
    axis = np.linspace(-extent, extent, n)
    xx, yy = np.meshgrid(axis, axis, indexing="ij")
    return np.column_stack([xx.ravel(), yy.ravel(), np.full(xx.size, z)])


def field_map_table(points: np.ndarray, e_field: np.ndarray, h_field: np.ndarray) -> np.ndarray:
    columns = [points]
    for values in (e_field, h_field):
        for d in range(3):
            columns.append(np.column_stack([values[:, d].real, values[:, d].imag]))
    return np.hstack(columns)


def export_field_map(path: str, points: np.ndarray, e_field: np.ndarray, h_field: np.ndarray) -> None:
    np.savetxt(path, field_map_table(points, e_field, h_field), delimiter=",", header=CSV_HEADER,
               comments="", fmt="%.12e")
