#!/usr/bin/env python3
"""
run_config.py - Run configuration for the aperture solver

A run is described by one TOML document:

    problem = "vector"            # or "scalar"
    assembly = "spatial"          # "spectral" or "both"

    [wave]        k, m = [m1, m2, m3], p = [p1, p2, p3] (vector only), amplitude
    [aperture]    shape = "disc" | "rectangle" | "polygon", radius | half_widths | vertices
    [mesh]        h, grading_ratio, grading_levels, min_angle_deg
    [quadrature]  far_order, close_order, near_order, near_levels, inner_order, close_factor, chunk_size
    [spectral]    xi_max, n_radial, n_angular, panel_width, eps_xi, chunk_size
    [output]      directory
    [samples]     n_aperture, n_screen, offset, screen_margin, fd_step, ray_kr, ray,
                  map_z, map_extent, map_n

Only [wave] and [aperture] are required. Unknown keys are errors.
"""

import logging
from dataclasses import asdict, dataclass, field, fields
from typing import Any, Dict, List, Optional

import numpy as np
import toml

from .assembly import AssemblyFactory, QuadratureSettings
from .errors import ConfigError, MeshError, QuadratureError
from .fields import SamplePlan
from .geometry import ApertureSpec
from .scalar_bie import ScalarWave
from .spectra import SpectralSettings
from .vector_bie import WaveContext

PROBLEMS = ("vector", "scalar")
BOTH_PATHS = "both"

QuadratureSection = QuadratureSettings
SpectralSection = SpectralSettings


@dataclass
class WaveSection:
    k: float
    m: List[float] = field(default_factory=lambda: [0.0, 0.0, -1.0])
    p: Optional[List[float]] = None
    amplitude: float = 1.0


@dataclass
class ApertureSection:
    shape: str
    radius: Optional[float] = None
    half_widths: Optional[List[float]] = None
    vertices: Optional[List[List[float]]] = None

    def to_spec(self) -> ApertureSpec:
        if self.shape == "disc":
            if self.radius is None:
                raise ConfigError("Disc aperture needs a radius", field="aperture.radius")
            return ApertureSpec.disc(self.radius)
        if self.shape == "rectangle":
            if self.half_widths is None or len(self.half_widths) != 2:
                raise ConfigError("Rectangle aperture needs two half_widths", field="aperture.half_widths")
            return ApertureSpec.rectangle(*self.half_widths)
        if self.shape == "polygon":
            if not self.vertices:
                raise ConfigError("Polygon aperture needs vertices", field="aperture.vertices")
            return ApertureSpec.polygon(self.vertices)
        raise ConfigError(f"Unknown aperture shape '{self.shape}'", field="aperture.shape")


@dataclass
class MeshSection:
    h: float = 0.25
    grading_ratio: float = 0.7
    grading_levels: int = 0
    min_angle_deg: float = 12.0


@dataclass
class OutputSection:
    directory: str = "runs/latest"


@dataclass
class SampleSection:
    n_aperture: int = 16
    n_screen: int = 16
    offset: float = 0.5
    screen_margin: float = 0.1
    fd_step: float = 1e-3
    ray_kr: List[float] = field(default_factory=lambda: [50.0, 100.0])
    ray: List[float] = field(default_factory=lambda: [0.3, 0.2, -0.93])
    map_z: float = -1.0
    map_extent: float = 2.0
    map_n: int = 21

    def to_plan(self) -> SamplePlan:
        return SamplePlan(n_aperture=self.n_aperture, n_screen=self.n_screen, offset=self.offset,
                          screen_margin=self.screen_margin, fd_step=self.fd_step,
                          ray_kr=tuple(self.ray_kr), ray=tuple(self.ray))


def _section(cls, data: Any, name: str):
    """Build a section dataclass from a dict, rejecting unknown keys."""
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ConfigError(f"[{name}] must be a table", field=name)
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"Unknown key(s) in [{name}]: {unknown}", field=f"{name}.{unknown[0]}")
    try:
        return cls(**data)
    except TypeError as e:
        raise ConfigError(f"Invalid [{name}] section: {e}", field=name)


def _drop_none(value):
    if isinstance(value, dict):
        return {k: _drop_none(v) for k, v in value.items() if v is not None}
    if isinstance(value, (list, tuple)):
        return [_drop_none(v) for v in value]
    return value


@dataclass
class RunConfig:
    """Complete description of one solver run"""
    wave: WaveSection
    aperture: ApertureSection
    problem: str = "vector"
    assembly: str = "spatial"
    mesh: MeshSection = field(default_factory=MeshSection)
    quadrature: QuadratureSection = field(default_factory=QuadratureSection)
    spectral: SpectralSection = field(default_factory=SpectralSection)
    output: OutputSection = field(default_factory=OutputSection)
    samples: SampleSection = field(default_factory=SampleSection)

    _TOP_LEVEL = ("problem", "assembly", "wave", "aperture", "mesh", "quadrature", "spectral", "output", "samples")

    @classmethod
    def from_dict(cls, config_dict: Dict[str, Any]) -> 'RunConfig':
        """
        Create config from dictionary

        Raises:
            ConfigError: on missing required sections or unknown keys
        """
        unknown = sorted(set(config_dict) - set(cls._TOP_LEVEL))
        if unknown:
            raise ConfigError(f"Unknown top-level key(s): {unknown}", field=unknown[0])
        for key in ("wave", "aperture"):
            if key not in config_dict:
                raise ConfigError(f"Missing required configuration section: [{key}]", field=key)
        return cls(
            problem=config_dict.get("problem", "vector"),
            assembly=config_dict.get("assembly", "spatial"),
            wave=_section(WaveSection, config_dict["wave"], "wave"),
            aperture=_section(ApertureSection, config_dict["aperture"], "aperture"),
            mesh=_section(MeshSection, config_dict.get("mesh"), "mesh"),
            quadrature=_section(QuadratureSettings, config_dict.get("quadrature"), "quadrature"),
            spectral=_section(SpectralSettings, config_dict.get("spectral"), "spectral"),
            output=_section(OutputSection, config_dict.get("output"), "output"),
            samples=_section(SampleSection, config_dict.get("samples"), "samples"),
        )

    @classmethod
    def from_toml(cls, path: str) -> 'RunConfig':
        try:
            data = toml.load(path)
        except FileNotFoundError:
            raise ConfigError(f"Config file not found: {path}", field="config")
        except toml.TomlDecodeError as e:
            raise ConfigError(f"Config file {path} is not valid TOML: {e}", field="config")
        logging.debug(f"Loaded config from {path}")
        return cls.from_dict(data)

    @classmethod
    def from_text(cls, text: str) -> 'RunConfig':
        try:
            return cls.from_dict(toml.loads(text))
        except toml.TomlDecodeError as e:
            raise ConfigError(f"Config text is not valid TOML: {e}", field="config")

    def to_dict(self) -> Dict[str, Any]:
        data = {"problem": self.problem, "assembly": self.assembly}
        for name in self._TOP_LEVEL[2:]:
            data[name] = asdict(getattr(self, name))
        return _drop_none(data)

    def to_toml(self) -> str:
        return toml.dumps(self.to_dict())

    def validate(self) -> bool:
        """
        Cross-field validation, done before any computation

        Raises:
            ConfigError: naming the offending field
        """
        if self.problem not in PROBLEMS:
            raise ConfigError(f"problem must be one of {list(PROBLEMS)}, got '{self.problem}'", field="problem")
        paths = AssemblyFactory.available_paths() + [BOTH_PATHS]
        if self.assembly not in paths:
            raise ConfigError(f"assembly must be one of {paths}, got '{self.assembly}'", field="assembly")
        self.wave_context()

        try:
            spec = self.aperture.to_spec()
        except MeshError as e:
            raise ConfigError(f"Invalid aperture: {e}", field="aperture")
        if not self.mesh.h > 0:
            raise ConfigError(f"Mesh parameter must be positive, got {self.mesh.h}", field="mesh.h")
        if self.mesh.h >= spec.diameter():
            raise ConfigError(f"Mesh parameter {self.mesh.h} is not below the aperture diameter "
                              f"{spec.diameter():.4g}", field="mesh.h")
        if not 0.0 < self.mesh.grading_ratio < 1.0:
            raise ConfigError(f"grading_ratio must lie in (0, 1), got {self.mesh.grading_ratio}",
                              field="mesh.grading_ratio")
        if self.mesh.grading_levels < 0:
            raise ConfigError("grading_levels must be >= 0", field="mesh.grading_levels")

        try:
            self.quadrature.validate()
        except QuadratureError as e:
            raise ConfigError(str(e), field="quadrature")

        k = float(self.wave.k)
        sp = self.spectral
        if sp.xi_max is not None and not sp.xi_max > 2.0 * k:
            raise ConfigError(f"xi_max={sp.xi_max} must exceed 2k={2.0 * k}", field="spectral.xi_max")
        for name in ("n_radial", "n_angular", "chunk_size"):
            if getattr(sp, name) < 1:
                raise ConfigError(f"spectral.{name} must be positive", field=f"spectral.{name}")
        if not sp.panel_width > 0 or not sp.eps_xi > 0:
            raise ConfigError("panel_width and eps_xi must be positive", field="spectral")

        s = self.samples
        if s.n_aperture < 1 or s.n_screen < 1 or s.map_n < 1:
            raise ConfigError("Sample counts must be positive", field="samples")
        if not s.fd_step > 0 or not s.offset > 0 or not s.screen_margin > 0 or not s.map_extent > 0:
            raise ConfigError("Sample distances must be positive", field="samples")
        if s.map_z == 0.0:
            raise ConfigError("Field maps on the screen plane need a side; choose map_z != 0", field="samples.map_z")
        if len(s.ray) != 3 or not s.ray[2] < 0:
            raise ConfigError("Radiation ray must be a 3-vector pointing down", field="samples.ray")
        if len(s.ray_kr) < 2 or any(b <= a for a, b in zip(s.ray_kr, s.ray_kr[1:])) or s.ray_kr[0] <= 0:
            raise ConfigError("ray_kr must be at least two increasing positive values", field="samples.ray_kr")
        if not self.output.directory:
            raise ConfigError("Output directory cannot be empty", field="output.directory")
        return True

    def aperture_spec(self) -> ApertureSpec:
        try:
            return self.aperture.to_spec()
        except MeshError as e:
            raise ConfigError(f"Invalid aperture: {e}", field="aperture")

    def wave_context(self):
        """ScalarWave or WaveContext for the configured problem (validating the wave section)."""
        w = self.wave
        if len(w.m) != 3:
            raise ConfigError("wave.m must have three components", field="wave.m")
        if abs(float(np.linalg.norm(w.m)) - 1.0) > 1e-10:
            raise ConfigError(f"wave.m must be a unit vector, |m| = {np.linalg.norm(w.m):.6g}", field="wave.m")
        if self.problem == "scalar":
            if w.p is not None:
                raise ConfigError("wave.p is only used by vector runs", field="wave.p")
            return ScalarWave(k=float(w.k), m=np.asarray(w.m, dtype=float), amplitude=float(w.amplitude))
        if w.p is None:
            raise ConfigError("Vector runs need a polarization wave.p", field="wave.p")
        return WaveContext(k=float(w.k), m=np.asarray(w.m, dtype=float), p=np.asarray(w.p, dtype=float),
                           amplitude=float(w.amplitude))
