"""Agreement between distance estimates and a known base geometry."""

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
from loguru import logger
from scipy.spatial.distance import pdist, squareform
from scipy.stats import pearsonr

from .contagion import ContagionConfig, contagion_matrix, symmetric_contagion_map
from .errors import ConstantInput, InvalidInput
from .isomap import ShortestPathConfig, UnreachablePolicy, floyd_warshall
from .schemas import DissimilarityMatrix, NeighbourhoodGraph, PointCloud, p_dist, upper_triangle

Reference = Union[PointCloud, DissimilarityMatrix]


@dataclass(frozen=True, eq=False)
class DistanceVectorPair:
    """Two distance vectors over the same unordered pairs."""
    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.a, dtype=np.float64).ravel()
        b = np.asarray(self.b, dtype=np.float64).ravel()
        if a.shape != b.shape:
            raise InvalidInput(f"distance vectors differ in length: {a.size} vs {b.size}")
        if a.size < 2:
            raise InvalidInput("a correlation needs at least two pairs")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
            raise InvalidInput("distance vectors must be finite")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @classmethod
    def from_matrices(
        cls,
        first: DissimilarityMatrix,
        second: DissimilarityMatrix,
        mask: Optional[np.ndarray] = None,
    ) -> "DistanceVectorPair":
        if first.n != second.n:
            raise InvalidInput(f"matrices cover {first.n} and {second.n} nodes")
        a, b = upper_triangle(first), upper_triangle(second)
        if mask is not None:
            a, b = a[mask], b[mask]
        return cls(a, b)


@dataclass
class GeometryRow:
    threshold: float
    r_direct: Optional[float]
    r_pointcloud: Optional[float]


@dataclass
class GeometryProfile:
    """Pearson correlations per contagion threshold plus an Isomap baseline."""
    rows: List[GeometryRow] = field(default_factory=list)
    isomap_direct: Optional[float] = None
    isomap_pointcloud: Optional[float] = None

    def best_threshold(self, variant: str = "direct") -> Optional[float]:
        scored = [
            (getattr(row, f"r_{variant}"), row.threshold)
            for row in self.rows
            if getattr(row, f"r_{variant}") is not None
        ]
        return max(scored)[1] if scored else None

    def as_dict(self) -> Dict[str, object]:
        return {
            "thresholds": [
                {"T": row.threshold, "r_direct": row.r_direct, "r_pointcloud": row.r_pointcloud}
                for row in self.rows
            ],
            "isomap": {"r_direct": self.isomap_direct, "r_pointcloud": self.isomap_pointcloud},
            "best_threshold": {
                "direct": self.best_threshold("direct"),
                "pointcloud": self.best_threshold("pointcloud"),
            },
        }

    def table(self) -> np.ndarray:
        """Rows ``(T, r_direct, r_pointcloud)`` with NaN for missing correlations."""
        values = [
            [row.threshold, *(math.nan if r is None else r for r in (row.r_direct, row.r_pointcloud))]
            for row in self.rows
        ]
        return np.array(values, dtype=np.float64).reshape(-1, 3)


def pairwise_euclidean(cloud: PointCloud) -> DissimilarityMatrix:
    if cloud.n_points == 1:
        return DissimilarityMatrix(np.zeros((1, 1)))
    return DissimilarityMatrix(squareform(pdist(cloud.points)))


def pearson(pair: DistanceVectorPair) -> float:
    """Sample Pearson correlation of the two vectors.

    Raises:
        ConstantInput: If either vector is constant
    """
    if np.ptp(pair.a) == 0 or np.ptp(pair.b) == 0:
        raise ConstantInput("Pearson correlation is undefined for a constant vector")
    r, _ = pearsonr(pair.a, pair.b)
    return float(np.clip(r, -1.0, 1.0))


def _reference_matrix(reference: Reference) -> DissimilarityMatrix:
    if isinstance(reference, PointCloud):
        return pairwise_euclidean(reference)
    return reference


def _safe_pearson(first: DissimilarityMatrix, second: DissimilarityMatrix, mask: Optional[np.ndarray]) -> Optional[float]:
    try:
        return pearson(DistanceVectorPair.from_matrices(first, second, mask))
    except (ConstantInput, InvalidInput) as e:
        logger.warning(f"correlation skipped: {e}")
        return None


def geometry_profile(
    graph: NeighbourhoodGraph,
    reference: Reference,
    thresholds: Sequence[float],
    exclude_sentinel: bool = False,
    threads: Optional[int] = None,
) -> GeometryProfile:
    """Correlate contagion-map distances with the reference geometry.

    For every threshold, ``r_direct`` uses the symmetric contagion map
    entries and ``r_pointcloud`` the Euclidean distances between its columns.
    The Isomap baseline uses hop-count shortest paths (unreachable pairs get
    the ``2N`` sentinel).

    Args:
        graph: Network the contagions run on
        reference: Point per node, or a ready-made distance matrix
        thresholds: Contagion thresholds to sweep
        exclude_sentinel: Drop pairs involving a never-activated node
        threads: Worker threads for the contagion sweep
    """
    target = _reference_matrix(reference)
    if target.n != graph.n_nodes:
        raise InvalidInput(f"reference has {target.n} points for {graph.n_nodes} nodes")

    profile = GeometryProfile()
    baseline = floyd_warshall(graph, ShortestPathConfig(unreachable_policy=UnreachablePolicy.SENTINEL))
    profile.isomap_direct = _safe_pearson(baseline, target, None)
    profile.isomap_pointcloud = _safe_pearson(p_dist(baseline), target, None)
    logger.info(f"Isomap baseline: r_direct={profile.isomap_direct}, r_pointcloud={profile.isomap_pointcloud}")

    for threshold in thresholds:
        x = contagion_matrix(graph, ContagionConfig(threshold=threshold, threads=threads))
        symmetric = symmetric_contagion_map(x)
        mask = None
        if exclude_sentinel:
            mask = upper_triangle(symmetric) < x.sentinel
        row = GeometryRow(
            threshold=float(threshold),
            r_direct=_safe_pearson(symmetric, target, mask),
            r_pointcloud=_safe_pearson(p_dist(symmetric), target, mask),
        )
        logger.info(f"T={threshold}: r_direct={row.r_direct}, r_pointcloud={row.r_pointcloud}")
        profile.rows.append(row)
    return profile
