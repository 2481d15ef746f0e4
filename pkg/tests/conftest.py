"""
Shared meshes and solutions for the test suite.

Building a mesh and assembling its matrices dominates the cost of most tests,
so the coarse meshes below are built once per session and shared.
"""

import pytest

from aperture.assembly import AssemblyFactory
from aperture.geometry import ApertureSpec, build_dofs, build_mesh
from aperture.vector_bie import WaveContext, solve_direct


@pytest.fixture(scope="session")
def unit_disc():
    """Unit disc at h = 0.5 (a few dozen cells)."""
    return build_mesh(ApertureSpec.disc(1.0), 0.5)


@pytest.fixture(scope="session")
def disc_dofs(unit_disc):
    return build_dofs(unit_disc)


@pytest.fixture(scope="session")
def disc_spatial(unit_disc, disc_dofs):
    return AssemblyFactory.create_path("spatial", unit_disc, disc_dofs)


@pytest.fixture(scope="session")
def square():
    """Square of side 1 at h = 0.25."""
    return build_mesh(ApertureSpec.rectangle(0.5, 0.5), 0.25)


@pytest.fixture(scope="session")
def normal_wave():
    return WaveContext.normal_incidence(1.0)


@pytest.fixture(scope="session")
def disc_solution(unit_disc, disc_spatial, normal_wave):
    """Vector density for normal incidence at k = 1 on the unit disc."""
    return solve_direct(unit_disc, normal_wave, assembly=disc_spatial)
