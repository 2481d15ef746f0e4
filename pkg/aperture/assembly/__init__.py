#!/usr/bin/env python3
"""
assembly package - Galerkin matrix assembly for the aperture operators

Two independent paths build the same matrices: a spatial path integrating the
Helmholtz kernel over cell pairs, and a spectral path integrating the kernel's
symbol against closed-form basis transforms.
"""

from .base import AssemblyPath, PanelRelation, QuadratureSettings
from .factory import AssemblyFactory
from .spatial_path import SpatialAssembly
from .spectral_path import SpectralAssembly

__all__ = ['AssemblyPath', 'PanelRelation', 'QuadratureSettings', 'AssemblyFactory',
           'SpatialAssembly', 'SpectralAssembly']
