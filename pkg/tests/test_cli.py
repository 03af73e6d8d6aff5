"""Tests for main.py - Command-line interface.

This module tests:
- Exit codes for success, usage errors and validation errors
- JSON error reports on stderr and the --log-dir log file
- info, presegment, fmap, export, eval, demo and run subcommands
"""

import json
import logging
from pathlib import Path

import numpy as np
import pytest

from coseg.fmap import read_maps_json
from coseg.mesh import TriMesh, read_ply, write_labels_json, write_off
from coseg.preseg import read_segmentation
from coseg.synthetic import jitter
from main import EXIT_USAGE, main


def _error_report(stderr: str) -> dict:
    """The JSON error line is the last line written to stderr."""
    return json.loads(stderr.strip().splitlines()[-1])


@pytest.fixture(autouse=True)
def _isolated_logger(clean_logger: logging.Logger) -> logging.Logger:
    return clean_logger


class TestExitCodes:
    """Tests for exit codes and error reports."""

    def test_no_subcommand(self, capsys: pytest.CaptureFixture[str]) -> None:
        assert main([]) == EXIT_USAGE

        report = _error_report(capsys.readouterr().err)
        assert report["exit_code"] == 1
        assert report["error"] == "UsageError"

    def test_unknown_option(self, tet_off: Path) -> None:
        assert main(["info", "--mesh", str(tet_off), "--bogus"]) == 1

    def test_missing_config(self, tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
        assert main(["run", "--config", str(tmp_path / "missing.json")]) == 2

        report = _error_report(capsys.readouterr().err)
        assert report == {
            "error": "ValidationError",
            "message": f"Config file not found: {tmp_path / 'missing.json'}",
            "exit_code": 2,
        }

    def test_unreadable_mesh(self, tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
        path = tmp_path / "broken.off"
        path.write_text("not a mesh\n")

        assert main(["info", "--mesh", str(path)]) == 3
        assert _error_report(capsys.readouterr().err)["error"] == "ParseError"


class TestInfo:
    def test_prints_statistics(self, tet_off: Path, capsys: pytest.CaptureFixture[str]) -> None:
        assert main(["info", "--mesh", str(tet_off)]) == 0

        out = capsys.readouterr().out
        assert "vertices: 4" in out
        assert "faces: 4" in out
        assert "components: 1" in out


class TestLogDir:
    def test_errors_reach_the_log_file(self, tmp_path: Path) -> None:
        """--log-dir adds a coseg.log next to the stderr output."""
        path = tmp_path / "broken.off"
        path.write_text("not a mesh\n")
        log_dir = tmp_path / "logs"

        assert main(["info", "--mesh", str(path), "--log-dir", str(log_dir)]) == 3

        assert "broken.off" in (log_dir / "coseg.log").read_text()

    def test_no_log_file_by_default(self, tet_off: Path, tmp_path: Path) -> None:
        assert main(["info", "--mesh", str(tet_off)]) == 0

        assert not list(tmp_path.rglob("coseg.log"))


class TestPresegment:
    def test_writes_segmentation(self, tet_off: Path, tmp_path: Path) -> None:
        code = main(["presegment", "--mesh", str(tet_off), "--parts", "2", "--embed-dim", "1",
                     "--output-dir", str(tmp_path)])

        assert code == 0
        segmentation = read_segmentation(tmp_path / "tet.segmentation.json")
        assert segmentation.n_parts == 2
        assert (tmp_path / "tet.parts.ply").is_file()


class TestFmap:
    def test_writes_map(self, small_sphere: TriMesh, tmp_path: Path) -> None:
        write_off(tmp_path / "a.off", small_sphere)
        write_off(tmp_path / "b.off", jitter(small_sphere, 0.01, seed=2))

        code = main(["fmap", "--source", str(tmp_path / "a.off"), "--target", str(tmp_path / "b.off"),
                     "--k", "20", "--k-eigs", "60", "--n-times", "20", "--output-dir", str(tmp_path)])

        assert code == 0
        (fmap,) = read_maps_json(tmp_path / "a-to-b.map.json")
        assert fmap.C.shape == (20, 20)


class TestExport:
    """Tests for the export subcommand."""

    def test_eigenfunction_ply(self, tet_off: Path, tmp_path: Path) -> None:
        assert main(["export", "--mesh", str(tet_off), "--eigenvector", "2", "--output-dir", str(tmp_path)]) == 0

        vertices, faces, colors = read_ply(tmp_path / "tet-phi2.ply")
        assert len(vertices) == 4
        assert colors is not None

    def test_constant_eigenfunction_is_red(self, tet_off: Path, tmp_path: Path) -> None:
        """phi_1 is constant and positive, so every vertex is pure red."""
        assert main(["export", "--mesh", str(tet_off), "--eigenvector", "1", "--output-dir", str(tmp_path)]) == 0

        _, _, colors = read_ply(tmp_path / "tet-phi1.ply")
        np.testing.assert_array_equal(colors, [[255, 0, 0]] * 4)

    def test_zero_index_rejected(self, tet_off: Path, capsys: pytest.CaptureFixture[str]) -> None:
        assert main(["export", "--mesh", str(tet_off), "--eigenvector", "0"]) == 2
        assert "1-based" in _error_report(capsys.readouterr().err)["message"]

    def test_matrix_market(self, tet_off: Path, tmp_path: Path) -> None:
        code = main(["export", "--mesh", str(tet_off), "--mtx", str(tmp_path / "mtx"), "--output-dir", str(tmp_path)])

        assert code == 0
        assert (tmp_path / "mtx" / "tet-stiffness.mtx").is_file()
        assert (tmp_path / "mtx" / "tet-mass.mtx").is_file()


class TestEval:
    def test_prints_scores(self, tet_off: Path, tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
        write_labels_json(tmp_path / "pred.json", [1, 1, 0, 0])
        (tmp_path / "truth.seg").write_text("0\n0\n1\n1\n")

        code = main(["eval", "--pred", str(tmp_path / "pred.json"), "--truth", str(tmp_path / "truth.seg"),
                     "--mesh", str(tet_off)])

        assert code == 0
        scores = json.loads(capsys.readouterr().out)
        assert scores["accuracy"] == pytest.approx(1.0)
        assert scores["rand_index"] == 1.0


class TestDemoAndRun:
    def test_demo_then_run(self, tmp_path: Path) -> None:
        """The demo set co-segments with high accuracy through the CLI."""
        assert main(["demo", "--output-dir", str(tmp_path)]) == 0
        assert (tmp_path / "demo.json").is_file()

        assert main(["run", "--config", str(tmp_path / "demo.json"), "--output-dir", str(tmp_path / "cli-out")]) == 0

        scores = json.loads((tmp_path / "cli-out" / "scores.json").read_text())
        assert scores["set_accuracy"] >= 0.9
        assert (tmp_path / "cli-out" / "run.log").is_file()
        assert (tmp_path / "cli-out" / "manifest.json").is_file()
