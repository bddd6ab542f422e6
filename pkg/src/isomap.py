"""All-pairs shortest paths on neighbourhood graphs (the Isomap dissimilarity)."""

from dataclasses import dataclass
from enum import Enum
from typing import Optional, Union

import numpy as np
from loguru import logger
from scipy import sparse
from scipy.sparse.csgraph import floyd_warshall as _floyd_warshall

from .errors import GraphDisconnected, InvalidInput
from .graph_construction import GraphSpec, build_graph
from .schemas import DissimilarityMatrix, NeighbourhoodGraph, PointCloud


class UnreachablePolicy(str, Enum):
    ERROR = "error"
    SENTINEL = "sentinel"


@dataclass(frozen=True)
class ShortestPathConfig:
    """How path lengths are measured and what happens to unreachable pairs.

    Attributes:
        use_weights: sum edge weights instead of counting hops
        unreachable_policy: raise GraphDisconnected, or fill in ``sentinel``
        sentinel: value for unreachable pairs; ``None`` picks 2N for hop
            counts and twice the total edge weight otherwise
    """
    use_weights: bool = False
    unreachable_policy: UnreachablePolicy = UnreachablePolicy.ERROR
    sentinel: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "unreachable_policy", UnreachablePolicy(self.unreachable_policy))
        if self.sentinel is not None and not (np.isfinite(self.sentinel) and self.sentinel > 0):
            raise InvalidInput("sentinel must be a positive finite number")


def _default_sentinel(graph: NeighbourhoodGraph, use_weights: bool) -> float:
    if use_weights:
        return 2.0 * float(graph.weights.sum())
    return 2.0 * graph.n_nodes


def floyd_warshall(graph: NeighbourhoodGraph, cfg: ShortestPathConfig) -> DissimilarityMatrix:
    """Shortest-path lengths between all node pairs.

    Args:
        graph: Neighbourhood graph
        cfg: Weighting and unreachable-pair policy

    Returns:
        Symmetric matrix of path lengths with zero diagonal

    Raises:
        GraphDisconnected: If some pair is unreachable under the error policy
        InvalidInput: If weights are requested but missing, or an explicit
            sentinel does not exceed every finite path
    """
    n = graph.n_nodes
    if cfg.use_weights:
        if not graph.weighted:
            raise InvalidInput("use_weights requires a weighted graph")
        csgraph = sparse.csr_matrix(
            (graph.weights, (graph.edges[:, 0], graph.edges[:, 1])), shape=(n, n)
        )
    else:
        csgraph = graph.sparse_adjacency

    logger.info(f"Floyd-Warshall on {n} nodes ({'weighted' if cfg.use_weights else 'hop count'})")
    dist = _floyd_warshall(csgraph, directed=False, unweighted=not cfg.use_weights)
    dist = np.minimum(dist, dist.T)
    np.fill_diagonal(dist, 0.0)

    unreachable = ~np.isfinite(dist)
    if unreachable.any():
        if cfg.unreachable_policy == UnreachablePolicy.ERROR:
            raise GraphDisconnected(
                f"graph has {graph.n_components} connected components; "
                "geodesic distances are undefined between them"
            )
        largest = float(dist[~unreachable].max())
        sentinel = cfg.sentinel if cfg.sentinel is not None else _default_sentinel(graph, cfg.use_weights)
        if sentinel <= largest:
            raise InvalidInput(
                f"sentinel {sentinel} must exceed the longest finite path {largest}"
            )
        logger.debug(f"{int(unreachable.sum()) // 2} unreachable pairs set to {sentinel}")
        dist[unreachable] = sentinel

    return DissimilarityMatrix(dist)


def isomap_dissimilarity(
    source: Union[PointCloud, NeighbourhoodGraph],
    spec: Optional[GraphSpec],
    cfg: ShortestPathConfig,
) -> DissimilarityMatrix:
    """Build the neighbourhood graph (for point clouds) and run floyd_warshall."""
    if isinstance(source, PointCloud):
        if spec is None:
            raise InvalidInput("a point cloud needs a graph spec")
        graph = build_graph(source, spec)
    else:
        graph = source
    return floyd_warshall(graph, cfg)
