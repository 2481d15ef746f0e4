"""
Aperture - Diffraction of waves by an aperture in a plane screen

Boundary integral solvers for the scalar (sound-hard) and electromagnetic
(perfectly conducting) aperture problems, with spatial and spectral Galerkin
assembly, field evaluation, transmitted power and an acceptance suite.
"""

import os

import toml

_PYPROJECT = os.path.join(os.path.dirname(os.path.abspath(__file__)), "..", "pyproject.toml")


def _read_version() -> str:
    if os.path.exists(_PYPROJECT):
        return toml.load(_PYPROJECT)["project"]["version"]
    from importlib.metadata import PackageNotFoundError, version
    try:
        return version("aperture-solver")
    except PackageNotFoundError:
        return "0.0.0"


__version__ = _read_version()

from .errors import (ApertureError, ConfigError, MeshError, QuadratureError, SingularityError,  # noqa: E402
                     SolverError, ValidationFailure)
from .geometry import ApertureMesh, ApertureSpec, DofTable, build_dofs, build_mesh  # noqa: E402
from .assembly import AssemblyFactory, AssemblyPath, QuadratureSettings  # noqa: E402
from .spectra import SpectralGrid, SpectralSettings, build_spectral_grid  # noqa: E402
from .reports import SolveReport  # noqa: E402
from .scalar_bie import ScalarDensity, ScalarWave, solve_scalar, solve_T  # noqa: E402
from .vector_bie import VectorDensity, WaveContext, solve_direct, solve_saddle  # noqa: E402
from .fields import FieldEvaluator, PowerReport, residual_suite, transmission  # noqa: E402
from .run_config import RunConfig  # noqa: E402
from .harness import RunManifest  # noqa: E402

__all__ = [
    "ApertureError",
    "ConfigError",
    "MeshError",
    "QuadratureError",
    "SingularityError",
    "SolverError",
    "ValidationFailure",
    "ApertureMesh",
    "ApertureSpec",
    "DofTable",
    "build_dofs",
    "build_mesh",
    "AssemblyFactory",
    "AssemblyPath",
    "QuadratureSettings",
    "SpectralGrid",
    "SpectralSettings",
    "build_spectral_grid",
    "SolveReport",
    "ScalarDensity",
    "ScalarWave",
    "solve_scalar",
    "solve_T",
    "VectorDensity",
    "WaveContext",
    "solve_direct",
    "solve_saddle",
    "FieldEvaluator",
    "PowerReport",
    "residual_suite",
    "transmission",
    "RunConfig",
    "RunManifest",
]
