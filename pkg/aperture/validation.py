#!/usr/bin/env python3
"""
validation.py - Acceptance suite for the aperture solver

Each criterion is a closed-form oracle or a structural property of the
discrete operators. run_validation() executes the full list (or the desk-scale
quick subset) and returns a machine-readable verdict; the command line maps a
failed verdict to exit code 4.
"""

import contextlib
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .assembly import AssemblyFactory
from .errors import ApertureError, ConfigError
from .fields import FieldEvaluator, residual_suite, transmission
from .geometry import ApertureSpec, build_mesh
from .scalar_bie import electrified_disc_total, solve_T
from .spectra import (SpectralSettings, audit_branch, build_spectral_grid, corrupted_branch, weyl_accuracy_warnings,
                      weyl_check)
from .vector_bie import (WaveContext, coercivity_probe, discrete_curl, rwg_mass, solve_direct, solve_saddle,
                         vector_sigma_min_scaled)

FAULTS = ("branch",)
QUICK_CRITERIA = ("weyl_identity", "branch_audit", "sign_structure", "dual_assembly", "saddle_consistency")

# residuals that must shrink under refinement
MONOTONE_RESIDUALS = ("aperture_continuity_H", "maxwell_curl_H", "maxwell_curl_E")
# residuals that vanish for any edge field; only roundoff is allowed
ZERO_RESIDUALS = ("screen_tangential_E", "screen_normal_H")
ZERO_RESIDUAL_BOUND = 1e-10


@dataclass
class Criterion:
    """Outcome of one acceptance check"""
    name: str
    passed: bool
    value: Optional[float] = None
    threshold: Optional[float] = None
    detail: Dict = field(default_factory=dict)
    message: str = ""

    def to_dict(self) -> Dict:
        return {"name": self.name, "passed": self.passed, "value": self.value,
                "threshold": self.threshold, "detail": self.detail, "message": self.message}


@dataclass
class ValidationReport:
    quick: bool
    fault: Optional[str]
    criteria: List[Criterion] = field(default_factory=list)
    timings: Dict[str, float] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.criteria)

    @property
    def failed(self) -> List[str]:
        return [c.name for c in self.criteria if not c.passed]

    def to_dict(self) -> Dict:
        """Verdict without timings, so identical runs serialize identically."""
        return {"passed": self.passed, "quick": self.quick, "fault": self.fault,
                "failed": self.failed, "criteria": [c.to_dict() for c in self.criteria]}


@dataclass
class ValidationScale:
    """Mesh sizes and sample counts for one validation run."""
    coarse_h: float
    levels: Sequence[float]
    grading_levels: int
    n_weyl: int
    n_sign: int
    n_probe: int
    disc_tolerance: float
    dual_h: float = 0.5
    stability_levels: Sequence[float] = (0.5, 0.4, 0.3)
    xi_per_h: float = 150.0


QUICK_SCALE = ValidationScale(coarse_h=0.5, levels=(0.5, 0.4, 0.3), grading_levels=1, n_weyl=10,
                              n_sign=20, n_probe=20, disc_tolerance=0.05)
FULL_SCALE = ValidationScale(coarse_h=0.3, levels=(0.4, 0.28, 0.2), grading_levels=2, n_weyl=100,
                             n_sign=100, n_probe=50, disc_tolerance=0.02, dual_h=0.45,
                             stability_levels=(0.45, 0.35, 0.28))


def _unit_disc(h: float, grading_levels: int = 0):
    return build_mesh(ApertureSpec.disc(1.0), h, grading_levels=grading_levels)


def _relative_frobenius(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(a), 1e-300))


def check_weyl(scale: ValidationScale, seed: int = 0) -> Criterion:
    """Spectral reconstruction of exp(ikR)/(4 pi R) at random planar separations."""
    k = 1.0
    grid = build_spectral_grid(k, 300.0, 8, 16, panel_width=0.1)
    rng = np.random.default_rng(seed)
    wavelengths = rng.uniform(0.5, 5.0, scale.n_weyl)
    angles = rng.uniform(0.0, 2.0 * math.pi, scale.n_weyl)
    errors, warnings = [], []
    for s, a in zip(wavelengths, angles):
        r = 2.0 * math.pi * s / k
        warnings.extend(weyl_accuracy_warnings(r, grid))
        exact = np.exp(1j * k * r) / (4.0 * math.pi * r)
        value = weyl_check(np.zeros(2), r * np.array([math.cos(a), math.sin(a)]), k, grid)
        errors.append(abs(value - exact) / abs(exact))
    worst = float(np.max(errors))
    return Criterion("weyl_identity", worst < 1e-6, worst, 1e-6, {"n_points": scale.n_weyl, "warnings": warnings})


def check_branch(scale: ValidationScale, seed: int = 0) -> Criterion:
    """Im symbol > 0 inside |xi| < k, real positive outside."""
    grid = build_spectral_grid(1.0, 10.0, 8, 16)
    ok = audit_branch(grid)
    return Criterion("branch_audit", ok, detail={"n_radial_nodes": int(len(grid.rho))},
                     message="" if ok else "Symbol branch has the wrong sign")


def check_electrified_disc(scale: ValidationScale, seed: int = 0) -> Criterion:
    mesh = _unit_disc(scale.levels[-1], scale.grading_levels + 1)
    density = solve_T(mesh, 0.0, 1.0)
    total = float(density.integral().real)
    rel = abs(total - electrified_disc_total(1.0)) / electrified_disc_total(1.0)
    return Criterion("electrified_disc", rel < scale.disc_tolerance, rel, scale.disc_tolerance,
                     {"integral": total, "n_cells": mesh.n_cells})


def check_dual_assembly(scale: ValidationScale, seed: int = 0) -> Criterion:
    """Spatial and spectral Galerkin matrices, scalar and vector, at k = 1."""
    k = 1.0
    mesh = _unit_disc(scale.dual_h)
    spatial = AssemblyFactory.create_path("spatial", mesh)
    spectral = AssemblyFactory.create_path(
        "spectral", mesh, spatial.dofs, spectral=SpectralSettings(xi_max=scale.xi_per_h / mesh.h_min))
    scalar_err = _relative_frobenius(spatial.scalar_matrix(k), spectral.scalar_matrix(k))
    vector_err = _relative_frobenius(spatial.vector_matrix(k), spectral.vector_matrix(k))
    worst = max(scalar_err, vector_err)
    return Criterion("dual_assembly", worst < 1e-3, worst, 1e-3,
                     {"scalar": scalar_err, "vector": vector_err, "n_cells": mesh.n_cells})


def check_sign_structure(scale: ValidationScale, seed: int = 0) -> Criterion:
    """T0 quadratic form positive; Im(w* B w) <= 1e-6 ||w||^2."""
    k = 1.0
    mesh = _unit_disc(scale.coarse_h)
    assembly = AssemblyFactory.create_path("spatial", mesh)
    rng = np.random.default_rng(seed)

    t_static = np.real(assembly.scalar_matrix(0.0))
    psi = rng.standard_normal((scale.n_sign, mesh.n_cells))
    forms = np.einsum("si,ij,sj->s", psi, t_static, psi)

    b_mat = assembly.vector_matrix(k)
    n = assembly.dofs.n_vector
    w = rng.standard_normal((scale.n_sign, n)) + 1j * rng.standard_normal((scale.n_sign, n))
    im_forms = np.einsum("si,ij,sj->s", w.conj(), b_mat, w).imag / np.sum(np.abs(w) ** 2, axis=1)

    ok = bool(np.all(forms > 0) and np.all(im_forms <= 1e-6))
    return Criterion("sign_structure", ok, float(np.max(im_forms)), 1e-6,
                     {"min_static_form": float(np.min(forms)), "max_im_ratio": float(np.max(im_forms))})


def check_sigma_stability(scale: ValidationScale, seed: int = 0) -> Criterion:
    meshes = [_unit_disc(h) for h in scale.levels]
    spreads = {}
    for k in (0.5, 1.0, 2.0):
        values = [vector_sigma_min_scaled(mesh, k) for mesh in meshes]
        if any(v is None or v <= 0 for v in values):
            spreads[f"k={k:g}"] = float("inf")
        else:
            spreads[f"k={k:g}"] = float(max(values) / min(values))
    worst = max(spreads.values())
    return Criterion("sigma_stability", worst < 3.0, worst, 3.0, spreads)


def check_saddle(scale: ValidationScale, seed: int = 0) -> Criterion:
    """
    Direct and saddle-point solutions coincide and the constraint B(curl q, U) = 0
    holds. The L2 curl of U, from the edge incidence and the edge-basis mass,
    is reported alongside; it is not zero for a V-orthogonal split.
    """
    mesh = _unit_disc(scale.coarse_h)
    wave = WaveContext.normal_incidence(1.0)
    assembly = AssemblyFactory.create_path("spatial", mesh)
    direct = solve_direct(mesh, wave, assembly)
    state = solve_saddle(mesh, wave, assembly)
    w = direct.coefficients
    gap = float(np.linalg.norm(w - state.reconstruct()) / np.linalg.norm(w))
    constraint = state.report.extra["constraint_residual"]

    mass = rwg_mass(mesh, assembly.dofs)
    curl_u = discrete_curl(mesh, assembly.dofs, state.U.coefficients, mass)
    curl_w = discrete_curl(mesh, assembly.dofs, w, mass)
    ok = gap < 1e-8 and constraint < 1e-8
    return Criterion("saddle_consistency", ok, gap, 1e-8,
                     {"constraint_residual": constraint, "l2_curl_U": float(np.linalg.norm(curl_u)),
                      "l2_curl_W": float(np.linalg.norm(curl_w))})


def _refinement_solves(scale: ValidationScale, k: float = 1.0):
    wave = WaveContext.normal_incidence(k)
    out = []
    for h in scale.levels:
        mesh = _unit_disc(h, scale.grading_levels)
        assembly = AssemblyFactory.create_path("spatial", mesh)
        density = solve_direct(mesh, wave, assembly)
        out.append((mesh, assembly, density))
    return wave, out


def residual_trends(table: Dict[str, List[float]]) -> Tuple[List[str], List[str]]:
    """
    Names of the residuals that fail to shrink under refinement and of those
    that should vanish but exceed ZERO_RESIDUAL_BOUND.
    """
    not_decreasing = [name for name in MONOTONE_RESIDUALS if name in table
                      and any(b >= a for a, b in zip(table[name], table[name][1:]))]
    sm = sorted((name for name in table if name.startswith("silver_mueller")),
                key=lambda name: float(name[len("silver_mueller_kr"):]))
    if len(sm) >= 2 and not table[sm[-1]][-1] < table[sm[0]][-1]:
        not_decreasing.append("silver_mueller")
    not_zero = [name for name in ZERO_RESIDUALS if name in table
                and max(table[name]) >= ZERO_RESIDUAL_BOUND]
    return not_decreasing, not_zero


def check_physics_residuals(scale: ValidationScale, seed: int = 0) -> Criterion:
    wave, solves = _refinement_solves(scale)
    table = {}
    for _, _, density in solves:
        report = residual_suite(density, wave)
        for name, value in report.extra["residuals"].items():
            table.setdefault(name, []).append(value)
    not_decreasing, not_zero = residual_trends(table)
    return Criterion("physics_residuals", not (not_decreasing or not_zero),
                     detail={"residuals": table, "not_decreasing": not_decreasing, "not_zero": not_zero})


def check_energy(scale: ValidationScale, seed: int = 0) -> Criterion:
    """Pointwise aperture flux against the far-field hemisphere power."""
    wave = WaveContext.normal_incidence(1.0)
    mesh = _unit_disc(scale.levels[-1], scale.grading_levels)
    assembly = AssemblyFactory.create_path("spatial", mesh)
    density = solve_direct(mesh, wave, assembly)
    power = transmission(density, wave, assembly.vector_matrix(wave.k), evaluator=FieldEvaluator(density))
    return Criterion("energy_consistency", power.relative_difference < 0.02, power.relative_difference, 0.02,
                     power.to_dict())


def check_small_hole(scale: ValidationScale, seed: int = 0) -> Criterion:
    """Slope of log tau against log ka in the small-hole regime."""
    mesh = _unit_disc(scale.levels[1], scale.grading_levels)
    assembly = AssemblyFactory.create_path("spatial", mesh)
    ka = np.array([0.1, 0.2, 0.3])
    taus = []
    for k in ka:
        wave = WaveContext.normal_incidence(float(k))
        density = solve_direct(mesh, wave, assembly)
        w = density.coefficients
        power = -np.imag(np.conj(w) @ (assembly.vector_matrix(wave.k) @ w)) / wave.k
        taus.append(power / (0.5 * mesh.total_area()))
    taus = np.asarray(taus)
    if np.any(taus <= 0):
        return Criterion("small_hole_scaling", False, None, 4.0, {"tau": taus.tolist()},
                         "Non-positive transmission coefficient")
    slope = float(np.polyfit(np.log(ka), np.log(taus), 1)[0])
    return Criterion("small_hole_scaling", abs(slope - 4.0) <= 0.3, slope, 4.0, {"tau": taus.tolist()})


def check_probe_stability(scale: ValidationScale, seed: int = 0) -> Criterion:
    reports = [coercivity_probe(_unit_disc(h), 1.0, n_samples=scale.n_probe, seed=seed)
               for h in scale.stability_levels]
    spreads = {}
    for name in ("alpha", "beta", "linfty_sup"):
        values = [getattr(r, name) for r in reports]
        if any(v is None for v in values):
            continue
        values = np.abs(values)
        spreads[name] = float(np.max(values) / max(np.min(values), 1e-300))
    worst = max(spreads.values())
    return Criterion("probe_stability", worst <= 2.0, worst, 2.0, spreads)


CRITERIA: Dict[str, Callable[[ValidationScale, int], Criterion]] = {
    "weyl_identity": check_weyl,
    "branch_audit": check_branch,
    "electrified_disc": check_electrified_disc,
    "dual_assembly": check_dual_assembly,
    "sign_structure": check_sign_structure,
    "sigma_stability": check_sigma_stability,
    "saddle_consistency": check_saddle,
    "physics_residuals": check_physics_residuals,
    "energy_consistency": check_energy,
    "small_hole_scaling": check_small_hole,
    "probe_stability": check_probe_stability,
}


def run_validation(quick: bool = False, inject_fault: Optional[str] = None, seed: int = 0,
                   only: Optional[Sequence[str]] = None) -> ValidationReport:
    """
    Run the acceptance suite.

    Args:
        quick: desk-scale subset (weyl, branch, sign structure, coarse dual assembly, saddle)
        inject_fault: 'branch' flips the evanescent symbol branch for the whole run
        seed: seed for every random sample
        only: restrict to these criterion names

    Returns:
        ValidationReport

    Raises:
        ConfigError: for an unknown fault or criterion name
    """
    if inject_fault is not None and inject_fault not in FAULTS:
        raise ConfigError(f"Unknown fault '{inject_fault}'. Available: {list(FAULTS)}", field="inject_fault")
    names = list(only) if only else list(QUICK_CRITERIA if quick else CRITERIA)
    unknown = [n for n in names if n not in CRITERIA]
    if unknown:
        raise ConfigError(f"Unknown criteria: {unknown}. Available: {list(CRITERIA)}", field="criteria")

    scale = QUICK_SCALE if quick else FULL_SCALE
    report = ValidationReport(quick=quick, fault=inject_fault)
    fault = corrupted_branch() if inject_fault == "branch" else contextlib.nullcontext()
    with fault:
        for name in names:
            start_time = time.time()
            try:
                criterion = CRITERIA[name](scale, seed)
            except ApertureError as e:
                criterion = Criterion(name, False, message=f"{type(e).__name__}: {e}")
            report.timings[name] = time.time() - start_time
            report.criteria.append(criterion)
            marker = "✓" if criterion.passed else "✗"
            logging.info(f"{marker} {name} ({report.timings[name]:.2f} seconds)")
    if not report.passed:
        logging.warning(f"Validation failed: {report.failed}")
    return report
