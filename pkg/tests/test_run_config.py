#!/usr/bin/env python3
"""
test_run_config.py - TOML run configurations and their validation
"""

import copy
from pathlib import Path

import pytest

from aperture.errors import ConfigError
from aperture.run_config import RunConfig
from aperture.scalar_bie import ScalarWave
from aperture.vector_bie import WaveContext

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"

MINIMAL = {
    "wave": {"k": 1.0, "p": [1.0, 0.0, 0.0]},
    "aperture": {"shape": "disc", "radius": 1.0},
}


def config_with(**sections) -> dict:
    data = copy.deepcopy(MINIMAL)
    for name, value in sections.items():
        if isinstance(value, dict) and isinstance(data.get(name), dict):
            data[name].update(value)
        else:
            data[name] = value
    return data


def field_of(data: dict) -> str:
    with pytest.raises(ConfigError) as excinfo:
        RunConfig.from_dict(data).validate()
    return excinfo.value.field


class TestRunConfigParsing:
    """Sections, defaults and unknown keys"""

    def test_minimal_config(self):
        config = RunConfig.from_dict(MINIMAL)
        assert config.validate()
        assert config.problem == "vector"
        assert config.assembly == "spatial"
        assert config.mesh.h == 0.25
        assert config.spectral.xi_max is None
        assert config.wave.m == [0.0, 0.0, -1.0]
        assert isinstance(config.wave_context(), WaveContext)

    def test_scalar_wave_context(self):
        data = config_with(problem="scalar", wave={"k": 0.0})
        del data["wave"]["p"]
        config = RunConfig.from_dict(data)
        assert isinstance(config.wave_context(), ScalarWave)

    @pytest.mark.parametrize("missing", ["wave", "aperture"])
    def test_missing_section(self, missing):
        data = copy.deepcopy(MINIMAL)
        del data[missing]
        with pytest.raises(ConfigError) as excinfo:
            RunConfig.from_dict(data)
        assert excinfo.value.field == missing

    def test_unknown_top_level_key(self):
        with pytest.raises(ConfigError) as excinfo:
            RunConfig.from_dict(config_with(solver="gmres"))
        assert excinfo.value.field == "solver"

    def test_unknown_section_key(self):
        with pytest.raises(ConfigError) as excinfo:
            RunConfig.from_dict(config_with(mesh={"hh": 0.1}))
        assert excinfo.value.field == "mesh.hh"

    def test_section_must_be_table(self):
        with pytest.raises(ConfigError) as excinfo:
            RunConfig.from_dict(config_with(mesh=0.1))
        assert excinfo.value.field == "mesh"


class TestRunConfigValidation:
    """Cross-field checks name the offending field"""

    @pytest.mark.parametrize("sections, expected", [
        ({"wave": {"m": [0.0, 0.0, -2.0]}}, "wave.m"),
        ({"wave": {"m": [0.0, -1.0]}}, "wave.m"),
        ({"wave": {"m": [0.0, 0.0, 1.0]}}, "wave.m"),
        ({"wave": {"p": [0.0, 0.0, 1.0]}}, "wave.p"),
        ({"wave": {"k": 0.0}}, "wave.k"),
        ({"problem": "scalar"}, "wave.p"),
        ({"problem": "acoustic"}, "problem"),
        ({"assembly": "multipole"}, "assembly"),
        ({"aperture": {"shape": "ellipse"}}, "aperture.shape"),
        ({"aperture": {"shape": "disc", "radius": -1.0}}, "aperture"),
        ({"aperture": {"shape": "rectangle", "radius": None, "half_widths": [1.0]}}, "aperture.half_widths"),
        ({"mesh": {"h": 0.0}}, "mesh.h"),
        ({"mesh": {"h": 5.0}}, "mesh.h"),
        ({"mesh": {"grading_ratio": 1.0}}, "mesh.grading_ratio"),
        ({"quadrature": {"near_order": 3}}, "quadrature"),
        ({"spectral": {"xi_max": 1.5}}, "spectral.xi_max"),
        ({"spectral": {"n_angular": 0}}, "spectral.n_angular"),
        ({"samples": {"map_z": 0.0}}, "samples.map_z"),
        ({"samples": {"ray": [0.0, 0.0, 1.0]}}, "samples.ray"),
        ({"samples": {"ray_kr": [100.0, 50.0]}}, "samples.ray_kr"),
        ({"output": {"directory": ""}}, "output.directory"),
    ])
    def test_invalid_fields(self, sections, expected):
        assert field_of(config_with(**sections)) == expected

    @pytest.mark.parametrize("assembly", ["spatial", "spectral", "both"])
    def test_registered_assembly_paths_are_accepted(self, assembly):
        assert RunConfig.from_dict(config_with(assembly=assembly)).validate()

    def test_vector_run_needs_polarization(self):
        data = copy.deepcopy(MINIMAL)
        del data["wave"]["p"]
        assert field_of(data) == "wave.p"


class TestRunConfigFiles:
    """Loading from and writing to TOML"""

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError) as excinfo:
            RunConfig.from_toml(str(tmp_path / "absent.toml"))
        assert excinfo.value.field == "config"

    def test_invalid_toml(self, tmp_path):
        path = tmp_path / "broken.toml"
        path.write_text("[wave\nk = 1\n")
        with pytest.raises(ConfigError):
            RunConfig.from_toml(str(path))
        with pytest.raises(ConfigError):
            RunConfig.from_text("problem = ")

    def test_toml_round_trip(self):
        config = RunConfig.from_dict(config_with(mesh={"h": 0.3, "grading_levels": 1},
                                                 spectral={"xi_max": 50.0}))
        restored = RunConfig.from_text(config.to_toml())
        assert restored.to_dict() == config.to_dict()
        assert restored.validate()

    @pytest.mark.parametrize("path", sorted(CONFIG_DIR.glob("*.toml")), ids=lambda p: p.name)
    def test_shipped_configs_validate(self, path):
        assert RunConfig.from_toml(str(path)).validate()
