#!/usr/bin/env python3
"""
harness.py - Run orchestration: logging, output directories, manifests and the
subcommands behind the aperture-solver command line

Output layout (one directory per run):

    <out>/manifest.json      config echo, versions, timings, reports, file inventory
    <out>/config.toml        the validated configuration
    <out>/mesh.json          vertices and cells
    <out>/density.json       solved coefficients (solve, fields, transmission)
    <out>/report.json        solve report with residuals
    <out>/fields.csv         field map (fields)
    <out>/power.json         power report (transmission)
    <out>/convergence.csv    per-level table (convergence)
    <out>/validation.json    acceptance verdict (validate)
    <out>/logs/run.log       log of the run (not hashed)

Timings appear only in the manifest, so the hashed files of two runs with the
same configuration and --threads 1 are identical.
"""

import hashlib
import json
import logging
import math
import os
import platform
import shutil
import tempfile
import time
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import scipy
import shapely

from . import __version__
from .assembly import AssemblyFactory, AssemblyPath
from .errors import ConfigError, ValidationFailure
from .fields import FieldEvaluator, export_field_map, map_points, residual_suite, transmission
from .geometry import ApertureMesh, build_dofs, build_mesh
from .scalar_bie import (ScalarDensity, ScalarFieldEvaluator, electrified_disc_total, scalar_probe,
                         solve_scalar, solve_T)
from .run_config import RunConfig
from .validation import run_validation
from .vector_bie import VectorDensity, coercivity_probe, solve_direct

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(funcName)s(): - %(message)s"
MANIFEST_NAME = "manifest.json"


def setup_logging(log_dir: Optional[str] = None, verbose: bool = False) -> None:
    """Configure the root logger: console always, <log_dir>/run.log when a directory is given."""
    formatter = logging.Formatter(LOG_FORMAT)
    logger = logging.getLogger()
    logger.setLevel(logging.DEBUG if verbose else logging.INFO)

    # Remove existing handlers to avoid duplicates
    for handler in logger.handlers[:]:
        logger.removeHandler(handler)

    console_handler = logging.StreamHandler()
    console_handler.setFormatter(formatter)
    logger.addHandler(console_handler)

    if log_dir:
        os.makedirs(log_dir, exist_ok=True)
        log_file = os.path.join(log_dir, "run.log")
        file_handler = logging.FileHandler(log_file)
        file_handler.setFormatter(formatter)
        logger.addHandler(file_handler)
        logging.debug(f"Logging configured. Log file: {log_file}")


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    raise TypeError(f"Object of type {type(obj).__name__} is not JSON serializable")


def _write_atomic(text: str, output_filename: str) -> None:
    """
    Write text through a temporary file in the target directory and move it
    into place, so readers never see a partial file.
    """
    output_dir = os.path.dirname(os.path.abspath(output_filename))
    temp_fd, temp_path = tempfile.mkstemp(suffix=".tmp", prefix="aperture_", dir=output_dir)
    try:
        with os.fdopen(temp_fd, "w", encoding="utf-8") as f:
            f.write(text)
            f.flush()
            os.fsync(f.fileno())
        if os.name == "nt" and os.path.exists(output_filename):
            os.unlink(output_filename)
        shutil.move(temp_path, output_filename)
        logging.debug(f"Atomically wrote {output_filename}")
    except OSError as e:
        if os.path.exists(temp_path):
            os.unlink(temp_path)
        raise ConfigError(f"Failed to write {output_filename}: {e}", field="output.directory")


def write_json_atomic(content: Any, output_filename: str) -> None:
    _write_atomic(json.dumps(content, indent=2, default=_json_default) + "\n", output_filename)


def sha256_file(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 16), b""):
            digest.update(block)
    return digest.hexdigest()


def package_versions() -> Dict[str, str]:
    return {
        "aperture-solver": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "shapely": shapely.__version__,
    }


@dataclass
class RunManifest:
    """Everything needed to audit a run: config echo, versions, timings, reports and hashed outputs."""
    command: str
    config: Dict[str, Any] = field(default_factory=dict)
    versions: Dict[str, str] = field(default_factory=package_versions)
    timings: Dict[str, float] = field(default_factory=dict)
    reports: Dict[str, Any] = field(default_factory=dict)
    files: Dict[str, str] = field(default_factory=dict)

    def record_file(self, path: str, root: str) -> None:
        self.files[os.path.relpath(path, root)] = sha256_file(path)

    def to_dict(self) -> Dict[str, Any]:
        return {"command": self.command, "config": self.config, "versions": self.versions,
                "timings": self.timings, "reports": self.reports, "files": dict(sorted(self.files.items()))}

    def write(self, out_dir: str) -> str:
        path = os.path.join(out_dir, MANIFEST_NAME)
        write_json_atomic(self.to_dict(), path)
        return path


class RunContext:
    """Output directory of one run plus its manifest."""

    def __init__(self, command: str, out_dir: str, config: Optional[RunConfig] = None):
        self.out_dir = prepare_output(out_dir)
        self.manifest = RunManifest(command=command, config=config.to_dict() if config else {})
        self._started: Dict[str, float] = {}

    def path(self, name: str) -> str:
        return os.path.join(self.out_dir, name)

    def write_json(self, name: str, content: Any) -> str:
        path = self.path(name)
        write_json_atomic(content, path)
        self.manifest.record_file(path, self.out_dir)
        return path

    def write_text(self, name: str, text: str) -> str:
        path = self.path(name)
        _write_atomic(text, path)
        self.manifest.record_file(path, self.out_dir)
        return path

    def record(self, path: str) -> None:
        self.manifest.record_file(path, self.out_dir)

    def start(self, step: str) -> None:
        self._started[step] = time.time()

    def stop(self, step: str) -> float:
        elapsed = time.time() - self._started.pop(step)
        self.manifest.timings[step] = elapsed
        logging.info(f"{step} done in {elapsed:.2f} seconds")
        return elapsed

    def finish(self) -> RunManifest:
        path = self.manifest.write(self.out_dir)
        logging.info(f"✓ Manifest written: {path}")
        return self.manifest


def prepare_output(out_dir: str) -> str:
    """
    Create the run directory (and logs/) below an existing parent.

    Raises:
        ConfigError: if the parent directory does not exist or is not writable
    """
    if not out_dir:
        raise ConfigError("Output directory cannot be empty", field="output.directory")
    out_dir = os.path.abspath(out_dir)
    parent = os.path.dirname(out_dir)
    if not os.path.isdir(parent):
        raise ConfigError(f"Parent of output directory does not exist: {parent}", field="output.directory")
    if not os.access(parent, os.W_OK):
        raise ConfigError(f"Output directory parent is not writable: {parent}", field="output.directory")
    os.makedirs(os.path.join(out_dir, "logs"), exist_ok=True)
    return out_dir


# ---------------------------------------------------------------------------
# building blocks
# ---------------------------------------------------------------------------

def mesh_from_config(config: RunConfig, h: Optional[float] = None) -> ApertureMesh:
    m = config.mesh
    return build_mesh(config.aperture_spec(), h if h is not None else m.h, grading_ratio=m.grading_ratio,
                      grading_levels=m.grading_levels, min_angle_deg=m.min_angle_deg)


def assembly_for(config: RunConfig, mesh: ApertureMesh, path: str, dofs=None) -> AssemblyPath:
    if path == "spatial":
        return AssemblyFactory.create_path(path, mesh, dofs, quadrature=config.quadrature)
    return AssemblyFactory.create_path(path, mesh, dofs, spectral=config.spectral)


def _is_canonical_static(config: RunConfig) -> bool:
    return config.problem == "scalar" and float(config.wave.k) == 0.0


def _solve_with(config: RunConfig, mesh: ApertureMesh, assembly: AssemblyPath):
    wave = config.wave_context()
    if _is_canonical_static(config):
        return solve_T(mesh, 0.0, wave.amplitude, assembly)
    if config.problem == "scalar":
        return solve_scalar(mesh, wave, assembly)
    return solve_direct(mesh, wave, assembly)


def _relative(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(a), 1e-300))


def solve_config(config: RunConfig, mesh: ApertureMesh) -> Tuple[Any, AssemblyPath, Dict[str, Any]]:
    """
    Assemble and solve on one mesh with the configured path(s).

    With assembly = 'both' the spatial solution is returned and the report
    carries the spatial/spectral agreement of matrices and densities.
    """
    dofs = build_dofs(mesh)
    primary = "spectral" if config.assembly == "spectral" else "spatial"
    assembly = assembly_for(config, mesh, primary, dofs)
    density = _solve_with(config, mesh, assembly)
    summary: Dict[str, Any] = {"solve": density.report.to_dict(), "n_cells": mesh.n_cells,
                               "mesh_hash": mesh.content_hash()}

    if config.assembly == "both":
        other = assembly_for(config, mesh, "spectral", dofs)
        second = _solve_with(config, mesh, other)
        k = float(config.wave.k)
        if config.problem == "scalar":
            matrix_gap = _relative(assembly.scalar_matrix(k), other.scalar_matrix(k))
        else:
            matrix_gap = _relative(assembly.vector_matrix(k), other.vector_matrix(k))
        summary["agreement"] = {"matrix": matrix_gap,
                                "density": _relative(density.coefficients, second.coefficients)}
        logging.info(f"Spatial/spectral agreement: matrix {matrix_gap:.3e}")

    if isinstance(density, ScalarDensity):
        summary["integral"] = [density.integral().real, density.integral().imag]
        if _is_canonical_static(config) and config.aperture.shape == "disc":
            expected = electrified_disc_total(config.aperture.radius) * config.wave.amplitude
            summary["electrified_disc_error"] = abs(density.integral().real - expected) / abs(expected)
    return density, assembly, summary


def _residuals(config: RunConfig, density) -> Dict[str, float]:
    if _is_canonical_static(config):
        return {}
    report = residual_suite(density, config.wave_context(), config.samples.to_plan())
    return report.extra["residuals"]


def _check_config(config: RunConfig) -> None:
    config.validate()
    logging.info(f"✓ Config valid: {config.problem} problem, {config.aperture.shape} aperture, "
                 f"k={config.wave.k}, h={config.mesh.h}, assembly={config.assembly}")


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_mesh(config: RunConfig, out_dir: str) -> RunManifest:
    _check_config(config)
    ctx = RunContext("mesh", out_dir, config)
    ctx.write_text("config.toml", config.to_toml())
    ctx.start("mesh")
    mesh = mesh_from_config(config)
    ctx.stop("mesh")
    dofs = build_dofs(mesh)
    ctx.write_json("mesh.json", mesh.to_dict())
    ctx.manifest.reports["mesh"] = {"n_vertices": mesh.n_vertices, "n_cells": mesh.n_cells,
                                    "n_vector": dofs.n_vector, "n_multiplier": dofs.n_multiplier,
                                    "h_max": mesh.h_max, "h_min": mesh.h_min,
                                    "min_angle_deg": mesh.min_angle(), "area": mesh.total_area(),
                                    "mesh_hash": mesh.content_hash()}
    return ctx.finish()


def cmd_solve(config: RunConfig, out_dir: str, probe: bool = False, seed: int = 0) -> RunManifest:
    """mesh -> assemble -> solve -> residual suite -> exports."""
    _check_config(config)
    ctx = RunContext("solve", out_dir, config)
    ctx.write_text("config.toml", config.to_toml())

    ctx.start("mesh")
    mesh = mesh_from_config(config)
    ctx.stop("mesh")
    ctx.write_json("mesh.json", mesh.to_dict())

    ctx.start("solve")
    density, assembly, summary = solve_config(config, mesh)
    ctx.stop("solve")

    ctx.start("residuals")
    summary["residuals"] = _residuals(config, density)
    ctx.stop("residuals")

    if probe:
        ctx.start("probe")
        if config.problem == "scalar":
            summary["probe"] = scalar_probe(mesh, float(config.wave.k), seed=seed, assembly=assembly,
                                            spectral=config.spectral).to_dict()
        else:
            summary["probe"] = coercivity_probe(mesh, float(config.wave.k), seed=seed, assembly=assembly,
                                                spectral=config.spectral).to_dict()
        ctx.stop("probe")

    ctx.write_json("density.json", density.to_dict())
    ctx.write_json("report.json", summary)
    ctx.manifest.reports.update(summary)
    return ctx.finish()


def _scalar_map(path: str, points: np.ndarray, values: np.ndarray) -> None:
    table = np.column_stack([points, values.real, values.imag])
    np.savetxt(path, table, delimiter=",", header="x,y,z,Re u,Im u", comments="", fmt="%.12e")


def cmd_fields(config: RunConfig, out_dir: str) -> RunManifest:
    """Solve, then export the scattered field on the configured map plane as CSV."""
    _check_config(config)
    if config.samples.map_z == 0.0:
        raise ConfigError("Field maps on the screen plane need a side; choose map_z != 0", field="samples.map_z")
    ctx = RunContext("fields", out_dir, config)
    ctx.write_text("config.toml", config.to_toml())
    mesh = mesh_from_config(config)
    ctx.start("solve")
    density, _, summary = solve_config(config, mesh)
    ctx.stop("solve")
    ctx.write_json("density.json", density.to_dict())

    s = config.samples
    points = map_points(s.map_z, s.map_extent * mesh.diameter(), s.map_n)
    path = ctx.path("fields.csv")
    ctx.start("fields")
    if isinstance(density, VectorDensity):
        e_field, h_field = FieldEvaluator(density, near_order=config.quadrature.near_order,
                                          far_order=config.quadrature.far_order).evaluate(points)
        export_field_map(path, points, e_field, h_field)
    else:
        values = ScalarFieldEvaluator(density, near_order=config.quadrature.near_order,
                                      far_order=config.quadrature.far_order).evaluate(points)
        _scalar_map(path, points, values)
    ctx.stop("fields")
    ctx.record(path)
    summary["field_map"] = {"n_points": len(points), "z": s.map_z}
    ctx.manifest.reports.update(summary)
    return ctx.finish()


def cmd_transmission(config: RunConfig, out_dir: str) -> RunManifest:
    _check_config(config)
    if config.problem != "vector":
        raise ConfigError("Transmission is computed for vector runs only", field="problem")
    ctx = RunContext("transmission", out_dir, config)
    ctx.write_text("config.toml", config.to_toml())
    mesh = mesh_from_config(config)
    ctx.start("solve")
    density, assembly, summary = solve_config(config, mesh)
    ctx.stop("solve")
    ctx.start("transmission")
    power = transmission(density, config.wave_context(), assembly.vector_matrix(density.k))
    ctx.stop("transmission")
    ctx.write_json("density.json", density.to_dict())
    ctx.write_json("power.json", power.to_dict())
    summary["power"] = power.to_dict()
    ctx.manifest.reports.update(summary)
    logging.info(f"✓ tau = {power.tau:.6e} (far field {power.tau_far_field:.6e})")
    return ctx.finish()


def _energy_norm(density, assembly: AssemblyPath) -> float:
    c = density.coefficients
    if isinstance(density, ScalarDensity):
        gram = np.real(assembly.scalar_matrix(0.0))
    else:
        mass, div = assembly.vector_parts(0.0)
        gram = np.real(mass + div)
    return float(np.sqrt(abs(np.real(np.conj(c) @ (gram @ c)))))


def observed_rates(values: List[float]) -> List[Optional[float]]:
    """Self-convergence rates log2(|q_l - q_l+1| / |q_l+1 - q_l+2|) for halved mesh sizes."""
    rates: List[Optional[float]] = []
    for a, b, c in zip(values, values[1:], values[2:]):
        num, den = abs(a - b), abs(b - c)
        rates.append(math.log2(num / den) if num > 0 and den > 0 else None)
    return rates


def cmd_convergence(config: RunConfig, out_dir: str, n_levels: int = 3) -> RunManifest:
    """
    Solve at h, h/2, h/4, ... and report self-convergence rates of the
    density energy norm, the transmission coefficient (or integral) and the residuals.

    Raises:
        ConfigError: if n_levels < 3
    """
    if n_levels < 3:
        raise ConfigError(f"Convergence study needs at least 3 levels, got {n_levels}", field="levels")
    _check_config(config)
    ctx = RunContext("convergence", out_dir, config)
    ctx.write_text("config.toml", config.to_toml())

    rows: List[Dict[str, float]] = []
    for level in range(n_levels):
        h = config.mesh.h / 2 ** level
        step = f"level_{level}"
        ctx.start(step)
        mesh = mesh_from_config(config, h)
        density, assembly, _ = solve_config(config, mesh)
        row = {"level": level, "h": h, "n_unknowns": len(density.coefficients),
               "energy_norm": _energy_norm(density, assembly)}
        if isinstance(density, ScalarDensity):
            row["integral"] = density.integral().real
        else:
            w = density.coefficients
            b_mat = assembly.vector_matrix(density.k)
            power = -np.imag(np.conj(w) @ (b_mat @ w)) / density.k
            row["tau"] = float(power / (0.5 * config.wave.amplitude ** 2 * mesh.total_area()))
        row.update(_residuals(config, density))
        rows.append(row)
        ctx.stop(step)

    columns = list(rows[0].keys())
    quantities = [c for c in columns if c not in ("level", "h", "n_unknowns")]
    rates = {name: observed_rates([row[name] for row in rows]) for name in quantities}
    residual_names = [c for c in quantities if c not in ("energy_norm", "integral", "tau")]
    monotone = {name: all(b < a for a, b in zip([r[name] for r in rows], [r[name] for r in rows][1:]))
                for name in residual_names}

    lines = [",".join(columns)]
    for row in rows:
        lines.append(",".join(f"{row[c]:.12e}" if isinstance(row[c], float) else str(row[c]) for c in columns))
    ctx.write_text("convergence.csv", "\n".join(lines) + "\n")
    table = {"levels": rows, "rates": rates, "residuals_decreasing": monotone}
    ctx.write_json("convergence.json", table)
    ctx.manifest.reports["convergence"] = table
    for name, values in rates.items():
        logging.info(f"{name}: observed rates {values}")
    return ctx.finish()


def cmd_validate(out_dir: str, quick: bool = False, inject_fault: Optional[str] = None,
                 seed: int = 0) -> RunManifest:
    """
    Run the acceptance suite and write validation.json.

    Raises:
        ValidationFailure: if any criterion fails (after the verdict is written)
    """
    ctx = RunContext("validate", out_dir)
    report = run_validation(quick=quick, inject_fault=inject_fault, seed=seed)
    ctx.write_json("validation.json", report.to_dict())
    ctx.manifest.timings.update(report.timings)
    ctx.manifest.reports["validation"] = {"passed": report.passed, "failed": report.failed,
                                          "quick": quick, "fault": inject_fault}
    manifest = ctx.finish()
    if not report.passed:
        raise ValidationFailure(f"{len(report.failed)} criteria failed: {report.failed}", report.failed)
    logging.info(f"✓ All {len(report.criteria)} criteria passed")
    return manifest
