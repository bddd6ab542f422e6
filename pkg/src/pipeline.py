"""End-to-end workflow: input -> neighbourhood graph -> distance estimates
-> processed estimates (direct or point-cloud) -> structural inference.

Every (estimator, threshold, variant) branch is isolated: a failure is
recorded in its entry of the report and the remaining branches still run.
"""

import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable, Dict, Iterator, List, Optional, Tuple, Union

import numpy as np
from loguru import logger

from .config_manager import Config, load_document
from .contagion import ContagionConfig, MapKind, contagion_matrix, symmetric_contagion_map
from .data_io import (
    read_edgelist,
    read_pointcloud_csv,
    write_barcode,
    write_edgelist,
    write_matrix_csv,
    write_pointcloud_csv,
)
from .errors import ContagionMapError, InvalidInput
from .generators import (
    SwissRollSpec,
    TorusNetSpec,
    add_gaussian_noise,
    sphere_sample,
    swiss_roll_regular,
    swiss_roll_uniform,
    torus_flat_distances,
    torus_network,
    torus_reference,
)
from .geometry import DistanceVectorPair, GeometryProfile, GeometryRow, pairwise_euclidean, pearson
from .graph_construction import GraphSpec, build_graph, graph_summary, short_circuit_edges
from .isomap import ShortestPathConfig, floyd_warshall
from .mds import classical_mds, residual_profile
from .models import (
    AnalysesModel,
    BranchRecord,
    ContagionEstimator,
    EdgeListInput,
    GeneratorSpec,
    IsomapEstimator,
    MdsRecord,
    PersistenceAnalysis,
    PipelineConfig,
    PointCloudInput,
    RunReport,
    SwissRollGenerator,
    TorusGenerator,
    UniformSwissRollGenerator,
)
from .persistence import DEFAULT_MEMORY_BUDGET, DEFAULT_NATIVE_MAX_POINTS, VRConfig, barcode_summary, vr_persistence
from .plots import write_svg_plots
from .provenance import ProvenanceCollector, StageTimer
from .schemas import DissimilarityMatrix, NeighbourhoodGraph, PointCloud, Variant, p_dist, upper_triangle


@dataclass(frozen=True)
class RuntimeOptions:
    """Execution settings that never change results."""
    threads: Optional[int] = None
    memory_budget: int = DEFAULT_MEMORY_BUDGET
    native_max_points: int = DEFAULT_NATIVE_MAX_POINTS

    @classmethod
    def from_config(cls, config: Config, threads: Optional[int] = None) -> "RuntimeOptions":
        return cls(
            threads=threads or config.threads(),
            memory_budget=config.get("persistence.memory_budget"),
            native_max_points=config.get("persistence.native_max_points"),
        )


@dataclass
class LoadedInput:
    graph: NeighbourhoodGraph
    cloud: Optional[PointCloud] = None
    torus_n: Optional[int] = None
    seeds: Dict[str, int] = field(default_factory=dict)


@dataclass
class Estimate:
    """One distance estimate on the nodes plus what the analyses need from it."""
    estimator: str
    matrix: DissimilarityMatrix
    threshold: Optional[float] = None
    map_kind: Optional[MapKind] = None
    sentinel_mask: Optional[np.ndarray] = None
    never_activated: Optional[int] = None


def load_pipeline_config(path: Path, overrides: Optional[Dict[str, Any]] = None) -> PipelineConfig:
    """Parse a JSON, TOML or YAML pipeline config; non-None overrides win."""
    data = load_document(path)
    for key, value in (overrides or {}).items():
        if value is not None:
            data[key] = value
    return PipelineConfig.model_validate(data)


def derive_seeds(rng_seed: int) -> Dict[str, int]:
    """Independent per-stage seeds spawned from the run seed."""
    state = np.random.SeedSequence(rng_seed).generate_state(3)
    return {"generator": int(state[0]), "noise": int(state[1]), "subsample": int(state[2])}


def is_stochastic(spec: GeneratorSpec) -> bool:
    if isinstance(spec, TorusGenerator):
        return spec.d_ng > 0
    if isinstance(spec, SwissRollGenerator):
        return spec.snr is not None
    return True


def generate(spec: GeneratorSpec, seeds: Dict[str, int]) -> Union[PointCloud, NeighbourhoodGraph]:
    """Run a generator: torus specs give a graph, the others a point cloud."""
    if isinstance(spec, TorusGenerator):
        return torus_network(TorusNetSpec(spec.n, spec.d_ng, seeds["generator"], spec.matching))
    if isinstance(spec, SwissRollGenerator):
        cloud = swiss_roll_regular(SwissRollSpec(spec.density, spec.t_range, spec.height))
    elif isinstance(spec, UniformSwissRollGenerator):
        cloud = swiss_roll_uniform(spec.n_points, seeds["generator"], spec.t_range, spec.height, spec.sampling)
    else:
        cloud = sphere_sample(spec.n_points, seeds["generator"], spec.radius)
    if getattr(spec, "snr", None) is not None:
        cloud = add_gaussian_noise(cloud, spec.snr, seeds["noise"], spec.noise_scale)
    return cloud


def load_input(cfg: PipelineConfig) -> LoadedInput:
    seeds = derive_seeds(cfg.rng_seed)
    source = cfg.input

    if isinstance(source, EdgeListInput):
        return LoadedInput(read_edgelist(source.path, source.n_nodes), seeds=seeds)

    if isinstance(source, PointCloudInput):
        cloud = read_pointcloud_csv(source.path)
    else:
        generated = generate(source.generator, seeds)
        if isinstance(generated, NeighbourhoodGraph):
            return LoadedInput(generated, torus_n=source.generator.n, seeds=seeds)
        cloud = generated

    graph_cfg = cfg.graph
    graph = build_graph(cloud, GraphSpec(graph_cfg.kind, graph_cfg.k, graph_cfg.epsilon, graph_cfg.weighted))
    return LoadedInput(graph, cloud=cloud, seeds=seeds)


def _reference_matrix(cfg: PipelineConfig, loaded: LoadedInput) -> DissimilarityMatrix:
    pearson_cfg = cfg.analyses.pearson
    if pearson_cfg.reference == "torus":
        return pairwise_euclidean(torus_reference(loaded.torus_n))
    if pearson_cfg.reference == "torus_flat":
        return torus_flat_distances(loaded.torus_n)
    if pearson_cfg.reference == "intrinsic":
        if loaded.cloud is None or loaded.cloud.intrinsic_coords is None:
            raise InvalidInput("the intrinsic reference needs a point cloud with intrinsic coordinates")
        return pairwise_euclidean(PointCloud(loaded.cloud.intrinsic_coords))
    reference = pairwise_euclidean(read_pointcloud_csv(pearson_cfg.path))
    if reference.n != loaded.graph.n_nodes:
        raise InvalidInput(f"reference has {reference.n} points for {loaded.graph.n_nodes} nodes")
    return reference


def _estimates(
    cfg: PipelineConfig,
    graph: NeighbourhoodGraph,
    runtime: RuntimeOptions,
) -> Iterator[Tuple[str, Optional[float], Callable[[], Estimate]]]:
    """Yield (estimator, threshold, thunk) so each estimate fails in isolation."""
    for estimator in cfg.estimators:
        if isinstance(estimator, IsomapEstimator):
            def isomap(est: IsomapEstimator = estimator) -> Estimate:
                source = graph if est.use_weights else graph.unweighted()
                path_cfg = ShortestPathConfig(est.use_weights, est.unreachable_policy, est.sentinel)
                return Estimate("isomap", floyd_warshall(source, path_cfg))
            yield "isomap", None, isomap
        elif isinstance(estimator, ContagionEstimator):
            for threshold in estimator.thresholds:
                def contagion(est: ContagionEstimator = estimator, t: float = threshold) -> Estimate:
                    x = contagion_matrix(
                        graph, ContagionConfig(threshold=t, max_steps=est.max_steps, threads=runtime.threads)
                    )
                    symmetric = symmetric_contagion_map(x)
                    matrix = symmetric if est.map_kind == MapKind.SYMMETRIC else x.as_dissimilarity()
                    return Estimate(
                        "contagion",
                        matrix,
                        threshold=t,
                        map_kind=est.map_kind,
                        sentinel_mask=upper_triangle(symmetric) < x.sentinel,
                        never_activated=int(np.count_nonzero(x.x == x.sentinel)),
                    )
                yield "contagion", threshold, contagion


def _track_geometry(
    profile: GeometryProfile, estimator: str, threshold: Optional[float], records: List[BranchRecord]
) -> None:
    r = {rec.variant: rec.pearson for rec in records}
    direct, pointcloud = r.get(Variant.DIRECT), r.get(Variant.POINTCLOUD)
    if threshold is not None:
        profile.rows.append(GeometryRow(threshold, direct, pointcloud))
    elif profile.isomap_direct is None and profile.isomap_pointcloud is None:
        profile.isomap_direct, profile.isomap_pointcloud = direct, pointcloud


def _describe(error: Exception) -> str:
    if not isinstance(error, ContagionMapError):
        logger.exception("Unexpected error in pipeline branch")
    return f"{type(error).__name__}: {error}"


def vr_config(spec: PersistenceAnalysis, seed: int, runtime: RuntimeOptions) -> VRConfig:
    return VRConfig(
        max_dim=spec.max_dim,
        max_filtration=spec.max_filtration,
        subsample=spec.subsample,
        subsample_strategy=spec.subsample_strategy,
        seed=seed,
        backend=spec.backend,
        memory_budget=runtime.memory_budget,
        native_max_points=runtime.native_max_points,
    )


class Analyzer:
    """Runs the requested analyses on processed distance estimates.

    Args:
        analyses: Which analyses to run and their parameters
        out: Directory receiving residuals, embeddings, barcodes and plots
        runtime: Memory budget and backend limits for persistence
        subsample_seed: Seed for persistence subsampling
        reference: Base geometry for Pearson correlations
        colour: Per-node values used to colour embedding scatter plots
    """

    def __init__(
        self,
        analyses: AnalysesModel,
        out: Path,
        runtime: RuntimeOptions = RuntimeOptions(),
        subsample_seed: int = 0,
        reference: Optional[DissimilarityMatrix] = None,
        colour: Optional[np.ndarray] = None,
    ):
        self.analyses = analyses
        self.out = Path(out)
        self.reference = reference
        self.reference_error: Optional[str] = None
        self.colour = colour
        self.vr = None
        if analyses.persistence is not None:
            self.vr = vr_config(analyses.persistence, subsample_seed, runtime)

    def analyze(self, record: BranchRecord, estimate: Estimate) -> None:
        """Run every requested analysis on one branch, recording failures."""
        analyses = self.analyses
        key = record.key
        try:
            matrix = estimate.matrix if record.variant == Variant.DIRECT else p_dist(estimate.matrix)
        except Exception as e:
            message = _describe(e)
            record.errors = {name: message for name in analyses.requested()}
            return

        if analyses.mds_profile is not None:
            try:
                spec = analyses.mds_profile
                profile = residual_profile(matrix, spec.p_max, spec.criterion, spec.cap)
                embedding = classical_mds(matrix, min(spec.embed_dim, matrix.n))
                record.mds_profile = MdsRecord(
                    dimension=profile.dimension,
                    capped=profile.capped,
                    residuals={str(p): r for p, r in profile.plotted()},
                )
                write_matrix_csv(
                    self.out / "residuals" / f"{key}.csv",
                    np.array(profile.plotted()),
                    header=["p", "residual_variance"],
                )
                write_matrix_csv(
                    self.out / "embeddings" / f"{key}.csv",
                    embedding.coordinates,
                    header=[f"y{i + 1}" for i in range(embedding.p)],
                )
                write_svg_plots(self.out / "plots", key, profile=profile, embedding=embedding, colour=self.colour)
            except Exception as e:
                record.errors["mds_profile"] = _describe(e)

        if analyses.persistence is not None:
            try:
                barcode = vr_persistence(matrix, self.vr)
                record.persistence = barcode_summary(barcode, analyses.persistence.ratio)
                write_barcode(self.out / "barcodes" / f"{key}.csv", barcode)
                write_svg_plots(self.out / "plots", key, barcode=barcode)
            except Exception as e:
                record.errors["persistence"] = _describe(e)

        if analyses.pearson is not None:
            try:
                if self.reference is None:
                    raise InvalidInput(f"reference geometry unavailable: {self.reference_error}")
                mask = estimate.sentinel_mask if analyses.pearson.exclude_sentinel else None
                record.pearson = pearson(DistanceVectorPair.from_matrices(matrix, self.reference, mask))
            except Exception as e:
                record.errors["pearson"] = _describe(e)

    def ambient_persistence(self, cloud: PointCloud) -> Dict[str, Any]:
        """Barcode of the Euclidean Rips filtration on the input cloud itself."""
        barcode = vr_persistence(pairwise_euclidean(cloud), self.vr)
        write_barcode(self.out / "barcodes" / "ambient.csv", barcode)
        write_svg_plots(self.out / "plots", "ambient", barcode=barcode)
        return barcode_summary(barcode, self.analyses.persistence.ratio)


class PipelineRun:
    """State of one pipeline execution."""

    def __init__(self, cfg: PipelineConfig, runtime: RuntimeOptions):
        self.cfg = cfg
        self.runtime = runtime
        self.out = Path(cfg.output_dir)
        self.timer = StageTimer()
        self.analyzer = Analyzer(cfg.analyses, self.out, runtime, derive_seeds(cfg.rng_seed)["subsample"])

    def execute(self) -> RunReport:
        cfg = self.cfg
        self.out.mkdir(parents=True, exist_ok=True)

        with self.timer.stage("input"):
            loaded = load_input(cfg)
        graph = loaded.graph

        report = RunReport(
            config_sha256=cfg.digest(),
            rng_seed=cfg.rng_seed,
            seeds=loaded.seeds,
            versions=ProvenanceCollector.package_versions(),
            input={**cfg.input.model_dump(mode="json"), "n_nodes": graph.n_nodes},
        )

        with self.timer.stage("graph"):
            summary = graph_summary(graph)
            write_edgelist(self.out / "graph.edgelist", graph)
            if loaded.cloud is not None:
                write_pointcloud_csv(self.out / "points.csv", loaded.cloud)
                if loaded.cloud.intrinsic_coords is not None:
                    summary["short_circuit_edges"] = len(short_circuit_edges(graph, loaded.cloud))
                    self.analyzer.colour = loaded.cloud.intrinsic_coords[:, 0]
            elif loaded.torus_n is not None:
                self.analyzer.colour = np.arange(graph.n_nodes) // loaded.torus_n
            report.graph = summary

        if cfg.analyses.pearson is not None:
            try:
                self.analyzer.reference = _reference_matrix(cfg, loaded)
            except Exception as e:
                self.analyzer.reference_error = _describe(e)

        if cfg.analyses.persistence is not None and cfg.analyses.persistence.ambient:
            if loaded.cloud is None:
                report.errors["ambient_persistence"] = "ambient barcode needs point-cloud input"
            else:
                with self.timer.stage("ambient"):
                    try:
                        report.ambient_persistence = self.analyzer.ambient_persistence(loaded.cloud)
                    except Exception as e:
                        report.errors["ambient_persistence"] = _describe(e)

        geometry = GeometryProfile()
        for name, threshold, build in _estimates(cfg, graph, self.runtime):
            label = name if threshold is None else f"{name}_T{threshold:g}"
            with self.timer.stage(f"estimate:{label}"):
                try:
                    estimate = build()
                    write_matrix_csv(self.out / "estimates" / f"{label}.csv", estimate.matrix.d)
                    failure = None
                except Exception as e:
                    estimate, failure = None, _describe(e)

            branch = []
            for variant in cfg.variants():
                record = BranchRecord(estimator=name, threshold=threshold, variant=variant)
                if estimate is None:
                    record.errors = {a: f"estimate failed: {failure}" for a in cfg.analyses.requested()}
                else:
                    record.map_kind = estimate.map_kind
                    record.never_activated = estimate.never_activated
                    with self.timer.stage(f"analyze:{record.key}"):
                        self.analyzer.analyze(record, estimate)
                branch.append(record)
            report.records.extend(branch)
            if cfg.analyses.pearson is not None:
                _track_geometry(geometry, name, threshold, branch)

        if geometry.rows:
            write_matrix_csv(
                self.out / "geometry_profile.csv", geometry.table(), header=["T", "r_direct", "r_pointcloud"]
            )
            report.geometry = geometry.as_dict()
        return report


def render_records(records: List[BranchRecord]) -> List[str]:
    """One line per branch: P, dominant bars, Pearson r and failures."""
    lines = []
    for rec in records:
        parts = [rec.key]
        if rec.mds_profile is not None:
            cap = "+" if rec.mds_profile.capped else ""
            parts.append(f"P={rec.mds_profile.dimension}{cap}")
        if rec.persistence is not None:
            dominant = ", ".join(
                f"H{d}:{v['dominant']}" for d, v in rec.persistence["dimensions"].items()
            )
            parts.append(f"dominant bars [{dominant}]")
        if rec.pearson is not None:
            parts.append(f"r={rec.pearson:.4f}")
        for analysis, message in rec.errors.items():
            parts.append(f"{analysis} failed ({message})")
        lines.append("  ".join(parts))
    return lines


def render_text(report: RunReport) -> str:
    """Human-readable summary of a report."""
    lines = [f"config sha256: {report.config_sha256}", f"rng seed: {report.rng_seed}"]
    if report.graph:
        g = report.graph
        lines.append(
            f"graph: {g['nodes']} nodes, {g['edges']} edges, degree {g['min_degree']}..{g['max_degree']}"
            f" (mean {g['mean_degree']:.2f}), {g['components']} component(s)"
        )
        if "short_circuit_edges" in g:
            lines.append(f"short-circuit edges: {g['short_circuit_edges']}")
    if report.ambient_persistence:
        dims = report.ambient_persistence["dimensions"]
        lines.append("ambient barcode: " + ", ".join(f"H{d} dominant {v['dominant']}" for d, v in dims.items()))
    if report.geometry:
        best = report.geometry["best_threshold"]
        lines.append(f"geometry: best T direct={best['direct']}, pointcloud={best['pointcloud']}")
    lines.append("")
    lines.extend(render_records(report.records))
    for stage, message in report.errors.items():
        lines.append(f"{stage} failed ({message})")
    return "\n".join(lines) + "\n"


def write_report(out_dir: Path, report: RunReport) -> None:
    out_dir = Path(out_dir)
    (out_dir / "report.json").write_text(report.model_dump_json(indent=2) + "\n", encoding="utf-8")
    (out_dir / "report.txt").write_text(render_text(report), encoding="utf-8")


def run_pipeline(cfg: PipelineConfig, runtime: Optional[RuntimeOptions] = None) -> RunReport:
    """Execute the workflow and write report.json, report.txt and provenance.json.

    Raises:
        DataError: If the input cannot be loaded or no graph can be built
    """
    runtime = runtime or RuntimeOptions()
    provenance = ProvenanceCollector.collect_environment(runtime.threads)
    run = PipelineRun(cfg, runtime)
    logger.info(f"Pipeline started, writing to {run.out}")

    report = run.execute()
    with run.timer.stage("report"):
        write_report(run.out, report)

    provenance.finished_at = datetime.now(timezone.utc).isoformat()
    provenance.stage_seconds = dict(run.timer.seconds)
    (run.out / "provenance.json").write_text(
        json.dumps(provenance.model_dump(mode="json"), indent=2) + "\n", encoding="utf-8"
    )
    failed = sum(1 for rec in report.records if rec.errors)
    logger.info(f"Pipeline finished: {len(report.records)} branches, {failed} with errors")
    return report
