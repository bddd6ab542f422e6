"""Tests for the cmap command-line interface."""

import json
import math
from unittest.mock import patch

import numpy as np
import pytest
from click.testing import CliRunner
from loguru import logger
from scipy.spatial.distance import pdist, squareform

from src import __version__
from src.cli import EXIT_DATA, EXIT_INTERNAL, EXIT_USAGE, cli
from src.data_io import (
    read_edgelist,
    read_matrix_csv,
    read_pointcloud_csv,
    write_barcode,
    write_matrix_csv,
    write_pointcloud_csv,
)
from src.schemas import Barcode, PointCloud


@pytest.fixture
def runner():
    """Create a CLI test runner."""
    return CliRunner()


@pytest.fixture(autouse=True)
def reset_logging():
    yield
    logger.remove()


@pytest.fixture
def invoke(runner, tmp_path):
    """Invoke the CLI with settings isolated from the working directory."""
    def _invoke(*args):
        return runner.invoke(cli, ["--settings", str(tmp_path / "settings.toml"), *map(str, args)])
    return _invoke


@pytest.fixture
def cycle_edgelist(tmp_path):
    path = tmp_path / "cycle.edgelist"
    path.write_text("".join(f"{i} {(i + 1) % 6}\n" for i in range(6)))
    return path


@pytest.fixture
def planar_matrix(tmp_path):
    points = np.random.default_rng(0).random((12, 2))
    path = tmp_path / "plane.csv"
    write_matrix_csv(path, squareform(pdist(points)))
    return path


def test_cli_version(runner):
    result = runner.invoke(cli, ["--version"])
    assert result.exit_code == 0
    assert __version__ in result.output


def test_cli_help(runner):
    result = runner.invoke(cli, ["--help"])
    assert result.exit_code == 0
    for command in ("generate", "graph", "estimate", "analyze", "barcode", "pipeline"):
        assert command in result.output


def test_unknown_command_is_usage_error(runner):
    result = runner.invoke(cli, ["frobnicate"])
    assert result.exit_code == EXIT_USAGE


def test_bad_settings_file(runner, tmp_path):
    settings = tmp_path / "bad.toml"
    settings.write_text("[runtime\n")
    result = runner.invoke(cli, ["--settings", str(settings), "generate", "torus", "--n", "5", "--d-ng", "0",
                                 "--out", str(tmp_path / "t.edgelist")])
    assert result.exit_code == EXIT_USAGE
    assert "Error" in result.output


class TestGenerate:
    def test_torus_needs_seed(self, invoke, tmp_path):
        result = invoke("generate", "torus", "--n", 5, "--d-ng", 2, "--out", tmp_path / "t.edgelist")
        assert result.exit_code == EXIT_USAGE
        assert "--seed" in result.output

    def test_torus(self, invoke, tmp_path):
        out = tmp_path / "t.edgelist"
        result = invoke("generate", "torus", "--n", 5, "--d-ng", 2, "--seed", 1, "--out", out)
        assert result.exit_code == 0, result.output
        assert "edges: 125" in result.output
        assert read_edgelist(out).n_nodes == 25

    def test_clean_swiss_roll_needs_no_seed(self, invoke, tmp_path):
        out = tmp_path / "roll.csv"
        result = invoke("generate", "swiss_roll", "--density", 0.5, "--out", out)
        assert result.exit_code == 0, result.output
        assert "dimension: 3" in result.output
        assert out.read_text().startswith("x0,x1,x2,intrinsic_0,intrinsic_1")

    def test_noise_scale_option(self, invoke, tmp_path):
        clouds = {}
        for name, flags in [("clean", []), ("unit", ["--snr", 0, "--noise-scale", "unit"]), ("signal", ["--snr", 0])]:
            out = tmp_path / f"{name}.csv"
            result = invoke("generate", "swiss_roll_uniform", "--n-points", 200, "--seed", 1, *flags, "--out", out)
            assert result.exit_code == 0, result.output
            clouds[name] = read_pointcloud_csv(out).points
        unit = (clouds["unit"] - clouds["clean"]).std()
        signal = (clouds["signal"] - clouds["clean"]).std()
        assert unit == pytest.approx(1.0, rel=0.15)
        assert signal > 3 * unit

    def test_noise_scale_is_rejected_for_spheres(self, invoke, tmp_path):
        result = invoke("generate", "sphere", "--n-points", 10, "--seed", 1, "--noise-scale", "unit",
                        "--out", tmp_path / "s.csv")
        assert result.exit_code == EXIT_USAGE

    def test_invalid_parameters(self, invoke, tmp_path):
        result = invoke("generate", "torus", "--n", 3, "--d-ng", 0, "--out", tmp_path / "t.edgelist")
        assert result.exit_code == EXIT_USAGE


class TestGraph:
    def test_knn(self, invoke, tmp_path):
        points = tmp_path / "line.csv"
        write_pointcloud_csv(points, PointCloud(np.arange(5.0).reshape(-1, 1)))
        out = tmp_path / "g.edgelist"
        result = invoke("graph", points, "--kind", "knn", "--k", 1, "--out", out)
        assert result.exit_code == 0, result.output
        assert read_edgelist(out).edge_set() == {(0, 1), (1, 2), (2, 3), (3, 4)}

    def test_missing_k_is_usage_error(self, invoke, tmp_path):
        points = tmp_path / "line.csv"
        write_pointcloud_csv(points, PointCloud(np.arange(5.0).reshape(-1, 1)))
        result = invoke("graph", points, "--kind", "knn", "--out", tmp_path / "g.edgelist")
        assert result.exit_code == EXIT_USAGE

    def test_malformed_points_are_data_errors(self, invoke, tmp_path):
        points = tmp_path / "bad.csv"
        points.write_text("x0,x1\n1,2\n3,nope\n")
        result = invoke("graph", points, "--kind", "knn", "--k", 1, "--out", tmp_path / "g.edgelist")
        assert result.exit_code == EXIT_DATA
        assert "line 3" in result.output


class TestEstimate:
    def test_isomap(self, invoke, tmp_path, cycle_edgelist):
        result = invoke("estimate", cycle_edgelist, "--method", "isomap", "--out-dir", tmp_path / "est")
        assert result.exit_code == 0, result.output
        d = read_matrix_csv(tmp_path / "est" / "isomap.csv")
        assert d[0].tolist() == [0.0, 1.0, 2.0, 3.0, 2.0, 1.0]

    def test_contagion_thresholds(self, invoke, tmp_path, cycle_edgelist):
        out = tmp_path / "est"
        result = invoke(
            "estimate", cycle_edgelist, "--method", "contagion",
            "--threshold", 0.1, "--threshold", 0.3, "--out-dir", out,
        )
        assert result.exit_code == 0, result.output
        for name in ("contagion_T0.1.csv", "activation_T0.1.csv", "contagion_T0.3.csv"):
            assert (out / name).exists()
        d = read_matrix_csv(out / "contagion_T0.1.csv")
        assert d[0].tolist() == [0.0, 0.0, 2.0, 4.0, 2.0, 0.0]

    def test_method_required(self, invoke, tmp_path, cycle_edgelist):
        result = invoke("estimate", cycle_edgelist, "--out-dir", tmp_path / "est")
        assert result.exit_code == EXIT_USAGE

    def test_disconnected_isomap_is_data_error(self, invoke, tmp_path):
        path = tmp_path / "g.edgelist"
        path.write_text("0 1\n2 3\n")
        result = invoke("estimate", path, "--method", "isomap", "--out-dir", tmp_path / "est")
        assert result.exit_code == EXIT_DATA

    def test_short_sentinel_is_data_error(self, invoke, tmp_path):
        path = tmp_path / "g.edgelist"
        path.write_text("0 1\n1 2\n3 4\n")
        settings = tmp_path / "isomap.yaml"
        settings.write_text("kind: isomap\nunreachable_policy: sentinel\nsentinel: 1.5\n")
        result = invoke("estimate", path, "--config", settings, "--out-dir", tmp_path / "est")
        assert result.exit_code == EXIT_DATA
        assert "longest finite path" in result.output


class TestAnalyze:
    def test_mds_on_planar_distances(self, invoke, tmp_path, planar_matrix):
        out = tmp_path / "analysis"
        result = invoke("analyze", planar_matrix, "--variant", "direct", "--no-persistence", "--out-dir", out)
        assert result.exit_code == 0, result.output
        assert "plane_direct  P=2" in result.output
        records = json.loads((out / "analysis.json").read_text())
        assert records[0]["mds_profile"]["dimension"] == 2
        assert (out / "embeddings" / "plane_direct.csv").exists()

    def test_persistence(self, invoke, tmp_path, planar_matrix):
        out = tmp_path / "analysis"
        result = invoke("analyze", planar_matrix, "--no-mds", "--max-dim", 1, "--out-dir", out)
        assert result.exit_code == 0, result.output
        assert (out / "barcodes" / "plane_direct.csv").exists()
        assert (out / "barcodes" / "plane_pointcloud.csv").exists()

    def test_subsample_needs_seed(self, invoke, tmp_path, planar_matrix):
        result = invoke("analyze", planar_matrix, "--subsample", 5, "--out-dir", tmp_path / "a")
        assert result.exit_code == EXIT_USAGE

    def test_failed_analysis_keeps_exit_code(self, invoke, tmp_path):
        path = tmp_path / "asym.csv"
        write_matrix_csv(path, np.array([[0.0, 1.0, 2.0], [3.0, 0.0, 1.0], [2.0, 5.0, 0.0]]))
        result = invoke("analyze", path, "--variant", "direct", "--out-dir", tmp_path / "a")
        assert result.exit_code == 0
        assert "Some analyses failed" in result.output

    def test_nothing_to_do(self, invoke, tmp_path, planar_matrix):
        result = invoke("analyze", planar_matrix, "--no-mds", "--no-persistence", "--out-dir", tmp_path / "a")
        assert result.exit_code == EXIT_USAGE


class TestBarcode:
    @pytest.fixture
    def stored(self, tmp_path):
        path = tmp_path / "bars.csv"
        write_barcode(path, Barcode(((0, 0.0, math.inf), (0, 0.0, 0.5), (1, 0.0, 3.1), (1, 0.0, 1.0), (1, 0.5, 1.5))))
        return path

    def test_summary(self, invoke, stored):
        result = invoke("barcode", stored)
        assert result.exit_code == 0, result.output
        assert "H0: 2 bars, 1 infinite" in result.output
        assert "H1: 3 bars, 0 infinite, 0 zero-length, longest finite 3.1, dominant 1" in result.output

    def test_ratio_changes_dominance(self, invoke, stored):
        result = invoke("barcode", stored, "--ratio", 4)
        assert result.exit_code == 0, result.output
        assert "longest finite 3.1, dominant 0" in result.output

    def test_ratio_must_exceed_one(self, invoke, stored):
        assert invoke("barcode", stored, "--ratio", 1).exit_code == EXIT_USAGE

    def test_malformed_barcode_is_data_error(self, invoke, tmp_path):
        path = tmp_path / "bars.csv"
        path.write_text("dim,birth,death\n1,0,x\n")
        result = invoke("barcode", path)
        assert result.exit_code == EXIT_DATA


class TestPipeline:
    @pytest.fixture
    def run_config(self, tmp_path, cycle_edgelist):
        path = tmp_path / "run.yaml"
        path.write_text(
            f"input:\n  kind: edgelist\n  path: {cycle_edgelist}\n"
            "estimators:\n  - kind: isomap\n"
            "analyses:\n  mds_profile: {}\n"
            "rng_seed: 3\n"
        )
        return path

    def test_run(self, invoke, tmp_path, run_config):
        out = tmp_path / "results"
        result = invoke("pipeline", "--config", run_config, "--output-dir", out, "--variant", "direct")
        assert result.exit_code == 0, result.output
        assert "isomap_direct" in result.output
        assert "Results written to" in result.output
        report = json.loads((out / "report.json").read_text())
        assert report["rng_seed"] == 3
        assert len(report["records"]) == 1

    def test_seed_override(self, invoke, tmp_path, run_config):
        out = tmp_path / "results"
        result = invoke("pipeline", "--config", run_config, "--output-dir", out, "--seed", 11)
        assert result.exit_code == 0, result.output
        assert json.loads((out / "report.json").read_text())["rng_seed"] == 11

    def test_invalid_config(self, invoke, tmp_path):
        path = tmp_path / "run.json"
        path.write_text(json.dumps({"estimators": [{"kind": "isomap"}]}))
        result = invoke("pipeline", "--config", path)
        assert result.exit_code == EXIT_USAGE
        assert "Invalid configuration" in result.output

    def test_missing_config_file(self, invoke, tmp_path):
        result = invoke("pipeline", "--config", tmp_path / "missing.json")
        assert result.exit_code == EXIT_USAGE

    @patch("src.cli.run_pipeline")
    def test_unexpected_error_is_internal(self, mock_run, invoke, tmp_path, run_config):
        mock_run.side_effect = RuntimeError("boom")
        result = invoke("pipeline", "--config", run_config, "--output-dir", tmp_path / "results")
        assert result.exit_code == EXIT_INTERNAL
        assert "Internal error: boom" in result.output
