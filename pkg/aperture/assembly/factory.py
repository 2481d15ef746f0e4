#!/usr/bin/env python3
"""
factory.py - Factory for creating assembly path instances

Paths are looked up by short name ('spatial', 'spectral').
"""

from typing import Dict, Optional, Type

from ..errors import ConfigError
from ..geometry import ApertureMesh, DofTable
from .base import AssemblyPath


class AssemblyFactory:
    """Factory for creating assembly path instances"""

    _paths: Dict[str, Type[AssemblyPath]] = {}

    @classmethod
    def _initialize_paths(cls):
        """Register the built-in paths (lazy loading)"""
        if not cls._paths:
            from .spatial_path import SpatialAssembly
            from .spectral_path import SpectralAssembly
            cls._paths['spatial'] = SpatialAssembly
            cls._paths['spectral'] = SpectralAssembly

    @classmethod
    def create_path(cls, path_name: str, mesh: ApertureMesh, dofs: Optional[DofTable] = None,
                    **options) -> AssemblyPath:
        """
        Create an assembly path instance

        Args:
            path_name (str): 'spatial' or 'spectral'
            mesh (ApertureMesh): mesh to assemble on
            dofs (DofTable, optional): shared dof table
            **options: path-specific settings (quadrature=..., threads=..., spectral=..., grid=...)

        Returns:
            AssemblyPath: configured path

        Raises:
            ConfigError: if the path name is not recognized
        """
        cls._initialize_paths()

        if path_name.lower() not in cls._paths:
            available = list(cls._paths.keys())
            raise ConfigError(f"Unknown assembly path '{path_name}'. Available: {available}", field="assembly")

        path_class = cls._paths[path_name.lower()]
        return path_class(mesh, dofs, **options)

    @classmethod
    def available_paths(cls) -> list:
        cls._initialize_paths()
        return list(cls._paths.keys())
