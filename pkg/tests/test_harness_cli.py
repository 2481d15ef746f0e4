#!/usr/bin/env python3
"""
test_harness_cli.py - Command line exit codes, run directories and manifests
"""

import json
import logging
import os

import pytest

import aperture.harness
import aperture.validation
from aperture.errors import SolverError
from aperture.harness import observed_rates, setup_logging, sha256_file, write_json_atomic
from aperture_solver import EXIT_CONFIG, EXIT_OK, EXIT_SOLVER, EXIT_VALIDATION, main

STATIC_DISC = """
problem = "scalar"

[wave]
k = 0.0
m = [0.0, 0.0, -1.0]

[aperture]
shape = "disc"
radius = 1.0

[mesh]
h = 0.5
"""

VECTOR_DISC = """
[wave]
k = 1.0
m = [0.0, 0.0, -1.0]
p = [1.0, 0.0, 0.0]

[aperture]
shape = "disc"
radius = 1.0

[mesh]
h = 0.5
"""


def write_config(tmp_path, text: str, name: str = "run.toml") -> str:
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def read_manifest(out_dir) -> dict:
    with open(os.path.join(out_dir, "manifest.json")) as f:
        return json.load(f)


class CliTestBase:
    """Closes the run.log handlers that main() attaches to the root logger."""

    def teardown_method(self):
        logger = logging.getLogger()
        for handler in logger.handlers[:]:
            handler.close()
            logger.removeHandler(handler)


class TestExitCodes(CliTestBase):
    """Every error class maps to its documented exit code"""

    def test_missing_output_parent(self, tmp_path):
        config = write_config(tmp_path, STATIC_DISC)
        assert main(["solve", "--config", config, "--out", str(tmp_path / "absent" / "run")]) == EXIT_CONFIG

    def test_invalid_direction(self, tmp_path):
        config = write_config(tmp_path, STATIC_DISC.replace("[0.0, 0.0, -1.0]", "[0.0, 0.0, -2.0]"))
        assert main(["solve", "--config", config, "--out", str(tmp_path / "run")]) == EXIT_CONFIG

    def test_solve_needs_config(self, tmp_path):
        assert main(["solve", "--out", str(tmp_path / "run")]) == EXIT_CONFIG

    def test_missing_config_file(self, tmp_path):
        assert main(["mesh", "--config", str(tmp_path / "absent.toml")]) == EXIT_CONFIG

    def test_convergence_needs_three_levels(self, tmp_path):
        config = write_config(tmp_path, STATIC_DISC)
        code = main(["convergence", "--config", config, "--out", str(tmp_path / "run"), "--levels", "2"])
        assert code == EXIT_CONFIG

    def test_transmission_needs_vector_problem(self, tmp_path):
        config = write_config(tmp_path, STATIC_DISC)
        assert main(["transmission", "--config", config, "--out", str(tmp_path / "run")]) == EXIT_CONFIG

    def test_thread_count(self, tmp_path):
        config = write_config(tmp_path, STATIC_DISC)
        assert main(["mesh", "--config", config, "--out", str(tmp_path / "run"), "--threads", "0"]) == EXIT_CONFIG

    def test_solver_failure(self, tmp_path, monkeypatch):
        def failing(config, mesh):
            raise SolverError("System is singular", {"condition": float("inf")})

        monkeypatch.setattr(aperture.harness, "solve_config", failing)
        config = write_config(tmp_path, STATIC_DISC)
        assert main(["solve", "--config", config, "--out", str(tmp_path / "run")]) == EXIT_SOLVER

    def test_validation_failure(self, tmp_path, monkeypatch):
        monkeypatch.setattr(aperture.validation, "QUICK_CRITERIA", ("branch_audit",))
        out = tmp_path / "validate"
        assert main(["validate", "--out", str(out), "--quick", "--inject-fault", "branch"]) == EXIT_VALIDATION
        with open(out / "validation.json") as f:
            verdict = json.load(f)
        assert verdict["passed"] is False
        assert verdict["failed"] == ["branch_audit"]

    def test_validation_success(self, tmp_path, monkeypatch):
        monkeypatch.setattr(aperture.validation, "QUICK_CRITERIA", ("branch_audit",))
        assert main(["validate", "--out", str(tmp_path / "validate"), "--quick"]) == EXIT_OK

    def test_unknown_command(self):
        with pytest.raises(SystemExit):
            main(["optimize"])


class TestRunOutputs(CliTestBase):
    """Run directories, manifests and reproducibility"""

    def test_mesh_command(self, tmp_path):
        config = write_config(tmp_path, VECTOR_DISC)
        out = tmp_path / "mesh"
        assert main(["mesh", "--config", config, "--out", str(out)]) == EXIT_OK
        manifest = read_manifest(out)
        assert manifest["command"] == "mesh"
        assert set(manifest["files"]) == {"config.toml", "mesh.json"}
        assert manifest["reports"]["mesh"]["n_cells"] > 0

    def test_static_solve(self, tmp_path):
        config = write_config(tmp_path, STATIC_DISC)
        out = tmp_path / "run"
        assert main(["solve", "--config", config, "--out", str(out)]) == EXIT_OK
        manifest = read_manifest(out)
        assert set(manifest["files"]) == {"config.toml", "mesh.json", "density.json", "report.json"}
        for name, digest in manifest["files"].items():
            assert sha256_file(str(out / name)) == digest
        assert manifest["reports"]["electrified_disc_error"] < 0.2
        assert "solve" in manifest["timings"]
        assert os.path.isfile(out / "logs" / "run.log")

    def test_identical_runs_have_identical_files(self, tmp_path):
        config = write_config(tmp_path, STATIC_DISC)
        for name in ("a", "b"):
            assert main(["solve", "--config", config, "--out", str(tmp_path / name)]) == EXIT_OK
        assert read_manifest(tmp_path / "a")["files"] == read_manifest(tmp_path / "b")["files"]

    def test_vector_transmission(self, tmp_path):
        config = write_config(tmp_path, VECTOR_DISC)
        out = tmp_path / "tau"
        assert main(["transmission", "--config", config, "--out", str(out)]) == EXIT_OK
        with open(out / "power.json") as f:
            power = json.load(f)
        assert power["tau"] > 0
        assert power["agree"] is True

    def test_field_map(self, tmp_path):
        config = write_config(tmp_path, VECTOR_DISC + "\n[samples]\nmap_n = 3\n")
        out = tmp_path / "map"
        assert main(["fields", "--config", config, "--out", str(out)]) == EXIT_OK
        lines = (out / "fields.csv").read_text().splitlines()
        assert len(lines) == 10
        assert "fields.csv" in read_manifest(out)["files"]

    @pytest.mark.slow
    def test_convergence(self, tmp_path):
        config = write_config(tmp_path, STATIC_DISC)
        out = tmp_path / "conv"
        assert main(["convergence", "--config", config, "--out", str(out), "--levels", "3"]) == EXIT_OK
        with open(out / "convergence.json") as f:
            table = json.load(f)
        assert len(table["levels"]) == 3
        assert len(table["rates"]["integral"]) == 1

    @pytest.mark.slow
    def test_quick_validation(self, tmp_path):
        assert main(["validate", "--out", str(tmp_path / "validate"), "--quick"]) == EXIT_OK


class TestHarnessHelpers(CliTestBase):
    """Logging, atomic writes, hashes and rates"""

    def test_setup_logging_creates_log_file(self, tmp_path):
        setup_logging(str(tmp_path / "logs"))
        logging.info("hello")
        for handler in logging.getLogger().handlers:
            handler.flush()
        assert "hello" in (tmp_path / "logs" / "run.log").read_text()

    def test_write_json_atomic(self, tmp_path):
        path = tmp_path / "data.json"
        write_json_atomic({"value": 1.5}, str(path))
        assert json.loads(path.read_text()) == {"value": 1.5}
        assert [p.name for p in tmp_path.iterdir()] == ["data.json"]

    def test_sha256_file(self, tmp_path):
        path = tmp_path / "abc.txt"
        path.write_bytes(b"abc")
        assert sha256_file(str(path)) == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"

    def test_observed_rates(self):
        assert observed_rates([1.0, 0.5, 0.25, 0.125]) == [1.0, 1.0]
        assert observed_rates([1.0, 1.0, 1.0]) == [None]
