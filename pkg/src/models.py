"""Pipeline configuration and run report models."""

import hashlib
import json
import math
from pathlib import Path
from typing import Annotated, Any, Dict, List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .contagion import MapKind
from .generators import DEFAULT_T_RANGE, Matching, NoiseScale, RollSampling
from .isomap import UnreachablePolicy
from .persistence import Backend, SubsampleStrategy
from .schemas import GraphKind, Variant


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


# Generators

class SwissRollGenerator(_Strict):
    name: Literal["swiss_roll"] = "swiss_roll"
    density: float = Field(50.0, gt=0)
    t_range: Tuple[float, float] = DEFAULT_T_RANGE
    height: float = Field(21.0, gt=0)
    snr: Optional[float] = None
    noise_scale: NoiseScale = NoiseScale.UNIT


class UniformSwissRollGenerator(_Strict):
    name: Literal["swiss_roll_uniform"] = "swiss_roll_uniform"
    n_points: int = Field(2000, ge=1)
    t_range: Tuple[float, float] = DEFAULT_T_RANGE
    height: float = Field(21.0, gt=0)
    snr: Optional[float] = None
    sampling: RollSampling = RollSampling.AREA
    noise_scale: NoiseScale = NoiseScale.SIGNAL


class TorusGenerator(_Strict):
    name: Literal["torus"] = "torus"
    n: int = Field(50, ge=5)
    d_ng: int = Field(2, ge=0)
    matching: Matching = Matching.STUB


class SphereGenerator(_Strict):
    name: Literal["sphere"] = "sphere"
    n_points: int = Field(500, ge=1)
    radius: float = Field(1.0, gt=0)


GeneratorSpec = Annotated[
    Union[SwissRollGenerator, UniformSwissRollGenerator, TorusGenerator, SphereGenerator],
    Field(discriminator="name"),
]


# Inputs

class PointCloudInput(_Strict):
    kind: Literal["pointcloud_csv"] = "pointcloud_csv"
    path: Path


class EdgeListInput(_Strict):
    kind: Literal["edgelist"] = "edgelist"
    path: Path
    n_nodes: Optional[int] = Field(None, ge=1)


class GeneratorInput(_Strict):
    kind: Literal["generator"] = "generator"
    generator: GeneratorSpec


InputSpec = Annotated[
    Union[PointCloudInput, EdgeListInput, GeneratorInput],
    Field(discriminator="kind"),
]


class GraphModel(_Strict):
    """Neighbourhood graph section."""
    kind: GraphKind = GraphKind.KNN
    k: Optional[int] = Field(None, ge=1)
    epsilon: Optional[float] = Field(None, gt=0)
    weighted: bool = False

    @model_validator(mode="after")
    def check_parameters(self) -> "GraphModel":
        if self.kind == GraphKind.KNN and self.k is None:
            raise ValueError("knn graphs need k")
        if self.kind == GraphKind.EPSILON and self.epsilon is None:
            raise ValueError("epsilon graphs need epsilon")
        return self


# Estimators

class IsomapEstimator(_Strict):
    kind: Literal["isomap"] = "isomap"
    use_weights: bool = False
    unreachable_policy: UnreachablePolicy = UnreachablePolicy.ERROR
    sentinel: Optional[float] = Field(None, gt=0)


class ContagionEstimator(_Strict):
    kind: Literal["contagion"] = "contagion"
    thresholds: List[float] = Field(min_length=1)
    map_kind: MapKind = MapKind.SYMMETRIC
    max_steps: Optional[int] = Field(None, ge=1)

    @field_validator("thresholds")
    @classmethod
    def check_thresholds(cls, values: List[float]) -> List[float]:
        for value in values:
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"threshold {value} outside [0, 1]")
        return values


EstimatorSpec = Annotated[
    Union[IsomapEstimator, ContagionEstimator],
    Field(discriminator="kind"),
]


# Analyses

class MdsAnalysis(_Strict):
    p_max: int = Field(10, ge=1)
    criterion: float = Field(0.05, gt=0, lt=1)
    cap: int = Field(100, ge=1)
    embed_dim: int = Field(3, ge=1)


class PersistenceAnalysis(_Strict):
    max_dim: int = Field(1, ge=0, le=2)
    max_filtration: Optional[float] = Field(None, ge=0)
    subsample: Optional[int] = Field(None, ge=1)
    subsample_strategy: SubsampleStrategy = SubsampleStrategy.MAXMIN
    backend: Backend = Backend.AUTO
    ratio: float = Field(3.0, gt=1)
    ambient: bool = False


class PearsonAnalysis(_Strict):
    """Reference geometry for Pearson correlations.

    ``torus`` and ``torus_flat`` need a torus generator input, ``intrinsic``
    a point cloud with intrinsic coordinates and ``csv`` a reference point file.
    """
    reference: Literal["torus", "torus_flat", "intrinsic", "csv"] = "torus"
    path: Optional[Path] = None
    exclude_sentinel: bool = False

    @model_validator(mode="after")
    def check_path(self) -> "PearsonAnalysis":
        if self.reference == "csv" and self.path is None:
            raise ValueError("a csv reference needs a path")
        return self


class AnalysesModel(_Strict):
    mds_profile: Optional[MdsAnalysis] = None
    persistence: Optional[PersistenceAnalysis] = None
    pearson: Optional[PearsonAnalysis] = None

    @model_validator(mode="after")
    def at_least_one(self) -> "AnalysesModel":
        if not self.requested():
            raise ValueError("at least one analysis is required")
        return self

    def requested(self) -> List[str]:
        return [name for name in ("mds_profile", "persistence", "pearson") if getattr(self, name) is not None]


class PipelineConfig(_Strict):
    """Declarative description of one run: input, graph, estimators,
    analyses and the variants they run on."""
    input: InputSpec
    graph: Optional[GraphModel] = None
    estimators: List[EstimatorSpec] = Field(min_length=1)
    analyses: AnalysesModel
    variant: Variant = Variant.BOTH
    output_dir: Path = Path("results")
    rng_seed: int

    @model_validator(mode="before")
    @classmethod
    def single_estimator(cls, data: Any) -> Any:
        if isinstance(data, dict) and "estimator" in data and "estimators" not in data:
            data = dict(data)
            data["estimators"] = [data.pop("estimator")]
        return data

    @model_validator(mode="after")
    def check_graph(self) -> "PipelineConfig":
        if self.needs_graph_spec():
            if self.graph is None or self.graph.kind == GraphKind.EXTERNAL:
                raise ValueError("point-cloud input needs a knn or epsilon graph")
        if self.analyses.pearson is not None and self.analyses.pearson.reference.startswith("torus"):
            source = self.input
            if not (isinstance(source, GeneratorInput) and isinstance(source.generator, TorusGenerator)):
                raise ValueError("torus references need a torus generator input")
        return self

    def needs_graph_spec(self) -> bool:
        if isinstance(self.input, PointCloudInput):
            return True
        return isinstance(self.input, GeneratorInput) and not isinstance(self.input.generator, TorusGenerator)

    def variants(self) -> List[Variant]:
        if self.variant == Variant.BOTH:
            return [Variant.DIRECT, Variant.POINTCLOUD]
        return [self.variant]

    def digest(self) -> str:
        """sha256 of the canonical JSON form, ignoring ``output_dir``."""
        payload = self.model_dump(mode="json", exclude={"output_dir"})
        canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


# Report

class MdsRecord(BaseModel):
    dimension: int
    capped: bool
    residuals: Dict[str, float]


class BranchRecord(BaseModel):
    """Results of one (estimator, threshold, variant) branch."""
    estimator: str
    threshold: Optional[float] = None
    variant: Variant
    map_kind: Optional[MapKind] = None
    never_activated: Optional[int] = None
    mds_profile: Optional[MdsRecord] = None
    persistence: Optional[Dict[str, Any]] = None
    pearson: Optional[float] = None
    errors: Dict[str, str] = Field(default_factory=dict)

    @property
    def key(self) -> str:
        parts = [self.estimator]
        if self.threshold is not None:
            parts.append(f"T{self.threshold:g}")
        parts.append(self.variant.value)
        return "_".join(parts)


class RunReport(BaseModel):
    """Everything a run found; contains no timestamps so identical configs
    produce identical reports."""
    config_sha256: str
    rng_seed: int
    seeds: Dict[str, int]
    versions: Dict[str, str]
    input: Dict[str, Any]
    graph: Optional[Dict[str, Any]] = None
    ambient_persistence: Optional[Dict[str, Any]] = None
    geometry: Optional[Dict[str, Any]] = None
    records: List[BranchRecord] = Field(default_factory=list)
    errors: Dict[str, str] = Field(default_factory=dict)

    def record(self, estimator: str, threshold: Optional[float], variant: Variant) -> Optional[BranchRecord]:
        for rec in self.records:
            if rec.estimator == estimator and rec.variant == variant and (
                rec.threshold == threshold
                or (rec.threshold is not None and threshold is not None and math.isclose(rec.threshold, threshold))
            ):
                return rec
        return None


class Provenance(BaseModel):
    """Run metadata that changes between otherwise identical runs."""
    started_at: str
    finished_at: Optional[str] = None
    python_version: str
    platform: str
    packages: Dict[str, str]
    cpu_count: Optional[int] = None
    threads: Optional[int] = None
    argv: List[str] = Field(default_factory=list)
    stage_seconds: Dict[str, float] = Field(default_factory=dict)
