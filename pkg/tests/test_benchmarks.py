"""Full-size benchmark runs on the torus, Swiss-roll and sphere workloads.

Each check is a majority vote over five seeds; the torus sweeps are shared
between tests through ``torus_sweep``.
"""

from functools import lru_cache

import numpy as np
import pytest

from src.contagion import ContagionConfig, contagion_matrix, symmetric_contagion_map
from src.errors import ConstantInput
from src.generators import TorusNetSpec, torus_network, torus_reference
from src.geometry import DistanceVectorPair, pairwise_euclidean, pearson
from src.isomap import ShortestPathConfig, floyd_warshall
from src.mds import approximate_embedding_dimension
from src.models import PipelineConfig
from src.persistence import VRConfig, dominant_bars, vr_persistence
from src.pipeline import RuntimeOptions, run_pipeline
from src.schemas import DissimilarityMatrix, Variant, p_dist

pytestmark = [pytest.mark.slow, pytest.mark.timeout(7200)]

SEEDS = range(5)
THRESHOLDS = [round(0.1 * i, 1) for i in range(11)]
CAP = 100
RUNTIME = RuntimeOptions(threads=None)


def majority(flags) -> int:
    return sum(bool(f) for f in flags)


def _dimension(d: DissimilarityMatrix) -> int:
    try:
        return approximate_embedding_dimension(d, criterion=0.05, cap=CAP)
    except ConstantInput:
        return CAP


def _correlation(d: DissimilarityMatrix, reference: DissimilarityMatrix) -> float:
    try:
        return pearson(DistanceVectorPair.from_matrices(d, reference, None))
    except ConstantInput:
        return -np.inf


def _loops(cloud: DissimilarityMatrix, seed: int) -> int:
    barcode = vr_persistence(cloud, VRConfig(max_dim=1, subsample=600, seed=seed))
    return dominant_bars(barcode, 1)


def _measure(d: DissimilarityMatrix, reference: DissimilarityMatrix, seed: int, loops: bool) -> dict:
    cloud = p_dist(d)
    result = {
        "P": {"direct": _dimension(d), "pointcloud": _dimension(cloud)},
        "r": {"direct": _correlation(d, reference), "pointcloud": _correlation(cloud, reference)},
    }
    if loops:
        result["loops"] = _loops(cloud, seed)
    return result


@lru_cache(maxsize=None)
def torus_sweep(d_ng: int, seed: int) -> dict:
    """Dimension, correlation and H1 measurements for Isomap and every threshold."""
    graph = torus_network(TorusNetSpec(50, d_ng=d_ng, rng_seed=seed))
    reference = pairwise_euclidean(torus_reference(50))
    sweep = {"isomap": _measure(floyd_warshall(graph, ShortestPathConfig()), reference, seed, loops=True)}
    for threshold in THRESHOLDS:
        x = contagion_matrix(graph, ContagionConfig(threshold=threshold))
        sweep[threshold] = _measure(symmetric_contagion_map(x), reference, seed, loops=threshold in (0.2, 0.3))
    return sweep


def _best(sweep: dict, key: str, variant: str, pick) -> float:
    values = {t: sweep[t][key][variant] for t in THRESHOLDS}
    return pick(values, key=values.get)


class TestTorusDimension:
    def test_pointcloud_dimension_is_smallest_near_point_two(self):
        sweeps = [torus_sweep(2, seed) for seed in SEEDS]
        values = [s[0.2]["P"]["pointcloud"] for s in sweeps]
        minima = [min(s[t]["P"]["pointcloud"] for t in THRESHOLDS) for s in sweeps]
        assert majority(v == m for v, m in zip(values, minima)) >= 4
        assert all(v in (4, 5, 6) for v in values)
        assert majority(v == 4 for v in values) >= 3
        assert all(s["isomap"]["P"]["pointcloud"] >= 40 for s in sweeps)

    def test_direct_dimension_at_point_two(self):
        sweeps = [torus_sweep(2, seed) for seed in SEEDS]
        assert majority(s[0.2]["P"]["direct"] in (6, 7, 8, 9) for s in sweeps) >= 4
        assert all(s["isomap"]["P"]["direct"] == CAP for s in sweeps)


class TestTorusGeometry:
    @pytest.mark.parametrize(
        "d_ng, isomap_direct, isomap_pointcloud",
        [(2, 0.1458, 0.2175), (4, 0.1311, 0.2013)],
    )
    def test_correlation_peaks_at_point_two(self, d_ng, isomap_direct, isomap_pointcloud):
        sweeps = [torus_sweep(d_ng, seed) for seed in SEEDS]
        for variant in ("direct", "pointcloud"):
            peaks = [_best(s, "r", variant, max) for s in sweeps]
            assert majority(p == 0.2 for p in peaks) >= 4, variant
        for s in sweeps:
            assert s["isomap"]["r"]["direct"] == pytest.approx(isomap_direct, abs=0.05)
            assert s["isomap"]["r"]["pointcloud"] == pytest.approx(isomap_pointcloud, abs=0.05)


class TestTorusTopology:
    def test_two_dominant_loops_for_contagion_only(self):
        sweeps = [torus_sweep(4, seed) for seed in SEEDS]
        assert majority(s[0.2]["loops"] == 2 and s[0.3]["loops"] == 2 for s in sweeps) >= 4
        assert majority(s["isomap"]["loops"] == 0 for s in sweeps) >= 4


def noisy_roll_report(tmp_path, snr: float, seed: int):
    cfg = PipelineConfig.model_validate({
        "rng_seed": seed,
        "output_dir": str(tmp_path / f"snr{snr:g}_seed{seed}"),
        "variant": "direct",
        "input": {"kind": "generator", "generator": {"name": "swiss_roll_uniform", "n_points": 2000, "snr": snr}},
        "graph": {"kind": "knn", "k": 8, "weighted": True},
        "estimators": [
            {"kind": "isomap", "use_weights": True},
            {"kind": "contagion", "thresholds": [0.0, 0.2]},
        ],
        "analyses": {"mds_profile": {"p_max": 2}},
    })
    report = run_pipeline(cfg, RUNTIME)

    def residual(estimator, threshold):
        return report.record(estimator, threshold, Variant.DIRECT).mds_profile.residuals["2"]

    return {
        "isomap": residual("isomap", None),
        "contagion_0": residual("contagion", 0.0),
        "contagion_0.2": residual("contagion", 0.2),
    }


class TestSwissRoll:
    def test_only_the_wavefront_map_survives_heavy_noise(self, tmp_path):
        runs = [noisy_roll_report(tmp_path, 5.0, seed) for seed in SEEDS]
        assert majority(r["contagion_0.2"] < 0.05 for r in runs) >= 3
        assert majority(r["isomap"] > 0.05 for r in runs) >= 3
        assert majority(r["contagion_0"] > 0.05 for r in runs) >= 3

    def test_every_method_unrolls_lightly_noisy_data(self, tmp_path):
        runs = [noisy_roll_report(tmp_path, 20.0, seed) for seed in SEEDS]
        for method in ("isomap", "contagion_0", "contagion_0.2"):
            assert majority(r[method] < 0.05 for r in runs) >= 3, method


class TestSphereWorkflow:
    def test_five_barcodes_see_a_sphere(self, tmp_path):
        cfg = PipelineConfig.model_validate({
            "rng_seed": 11,
            "output_dir": str(tmp_path / "sphere"),
            "variant": "both",
            "input": {"kind": "generator", "generator": {"name": "sphere", "n_points": 400}},
            "graph": {"kind": "knn", "k": 8},
            "estimators": [
                {"kind": "isomap"},
                {"kind": "contagion", "thresholds": [0.1, 0.2, 0.3, 0.4]},
            ],
            "analyses": {
                "mds_profile": {},
                "persistence": {"max_dim": 2, "subsample": 80, "ambient": True},
            },
        })
        report = run_pipeline(cfg, RUNTIME)

        ambient = report.ambient_persistence["dimensions"]
        assert ambient["1"]["dominant"] == 0
        assert ambient["2"]["dominant"] == 1
        assert len(report.records) == 10
        for record in report.records:
            assert record.errors == {}, record.key
            assert record.persistence["dimensions"]["1"]["dominant"] == 0, record.key
        assert sorted(p.name for p in (tmp_path / "sphere" / "barcodes").iterdir())[0] == "ambient.csv"
