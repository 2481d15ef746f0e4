#!/usr/bin/env python3
"""
base.py - Abstract base class for assembly paths

Every path produces, for a given wavenumber k:
    T    the single-layer Galerkin matrix on piecewise constants,
    V, S the g-weighted mass and divergence Gram matrices of the edge basis,
and the vector form B = S - k^2 V.
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass
from enum import Enum
from typing import List, Optional, Tuple

import numpy as np

from ..errors import QuadratureError
from ..geometry import ApertureMesh, DofTable, build_dofs
from ..quadrature import MAX_ORDER

MIN_NEAR_ORDER = 4


class PanelRelation(Enum):
    """How two cells of a mesh relate for quadrature selection"""
    SELF = 3
    EDGE = 2
    VERTEX = 1
    CLOSE = 0
    FAR = -1


@dataclass
class QuadratureSettings:
    """Orders and subdivision levels for spatial assembly."""
    far_order: int = 4
    close_order: int = 8
    near_order: int = 6
    near_levels: int = 2
    inner_order: int = 4
    close_factor: float = 2.0
    chunk_size: int = 32

    def validate(self):
        for name in ("far_order", "close_order", "inner_order", "near_order"):
            value = getattr(self, name)
            if not 1 <= value <= MAX_ORDER:
                raise QuadratureError(f"quadrature.{name}={value} outside 1..{MAX_ORDER}")
        if self.near_order < MIN_NEAR_ORDER:
            raise QuadratureError(f"quadrature.near_order={self.near_order} is below the minimum "
                                  f"{MIN_NEAR_ORDER} for touching cell pairs")
        if self.near_levels < 0:
            raise QuadratureError(f"quadrature.near_levels must be >= 0, got {self.near_levels}")
        if self.close_factor < 0:
            raise QuadratureError(f"quadrature.close_factor must be >= 0, got {self.close_factor}")


class AssemblyPath(ABC):
    """Abstract base class for all assembly paths"""

    name = "abstract"

    def __init__(self, mesh: ApertureMesh, dofs: Optional[DofTable] = None):
        self.mesh = mesh
        self.dofs = dofs if dofs is not None else build_dofs(mesh)
        self.warnings: List[str] = []

    @abstractmethod
    def scalar_matrix(self, k: float) -> np.ndarray:
        """Galerkin matrix of the single-layer operator on piecewise constants"""
        pass

    @abstractmethod
    def vector_parts(self, k: float) -> Tuple[np.ndarray, np.ndarray]:
        """(V, S): g-weighted mass and g-weighted divergence Grams of the edge basis"""
        pass

    def vector_matrix(self, k: float) -> np.ndarray:
        mass, div = self.vector_parts(k)
        return div - k ** 2 * mass
