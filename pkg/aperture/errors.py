#!/usr/bin/env python3
"""
errors.py - Exception types raised across the aperture solver

Every error the command line can map to an exit code derives from ApertureError.
"""

from typing import Any, Dict, Optional


class ApertureError(Exception):
    """Base class for all solver errors"""


class ConfigError(ApertureError, ValueError):
    """Invalid run configuration or environment. Carries the offending field name."""

    def __init__(self, message: str, field: Optional[str] = None):
        super().__init__(message)
        self.field = field


class MeshError(ApertureError, ValueError):
    """Degenerate aperture description or a mesh that violates its invariants"""


class QuadratureError(ApertureError, ValueError):
    """Unsupported quadrature order or rule parameters"""


class SingularityError(ApertureError, ValueError):
    """Evaluation at (or too close to) a kernel singularity"""


class SolverError(ApertureError, RuntimeError):
    """Singular or ill-conditioned linear system"""

    def __init__(self, message: str, diagnostics: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class ValidationFailure(ApertureError):
    """One or more acceptance criteria failed"""

    def __init__(self, message: str, failed: Optional[list] = None):
        super().__init__(message)
        self.failed = failed or []
