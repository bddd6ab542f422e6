"""Neighbourhood graphs on point clouds and ingestion of given networks."""

import warnings
from dataclasses import dataclass
from typing import Any, Dict, Iterable, Iterator, List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger
from scipy.spatial.distance import cdist

from .errors import DegenerateInputWarning, IndexOutOfRange, InvalidInput, SelfLoop
from .schemas import GraphKind, NeighbourhoodGraph, PointCloud

# Upper bound on the number of distances held in memory per block
BLOCK_ENTRIES = 4_000_000


@dataclass(frozen=True)
class GraphSpec:
    """How to build a neighbourhood graph.

    Attributes:
        kind: knn, epsilon or external (use a given network as-is)
        k: neighbour count for knn graphs
        epsilon: closed-ball radius for epsilon graphs
        weighted: whether edges carry their Euclidean length
    """
    kind: GraphKind = GraphKind.KNN
    k: Optional[int] = None
    epsilon: Optional[float] = None
    weighted: bool = False

    def __post_init__(self):
        object.__setattr__(self, "kind", GraphKind(self.kind))
        if self.kind == GraphKind.KNN and (self.k is None or self.k < 1):
            raise InvalidInput("knn graphs need a positive k")
        if self.kind == GraphKind.EPSILON and (self.epsilon is None or not self.epsilon > 0):
            raise InvalidInput("epsilon graphs need epsilon > 0")


def _row_blocks(n_rows: int, n_cols: int) -> Iterator[Tuple[int, int]]:
    step = max(1, BLOCK_ENTRIES // max(n_cols, 1))
    for start in range(0, n_rows, step):
        yield start, min(n_rows, start + step)


def _edge_lengths(points: np.ndarray, edges: np.ndarray) -> np.ndarray:
    diff = points[edges[:, 0]] - points[edges[:, 1]]
    return np.sqrt(np.einsum("ij,ij->i", diff, diff))


def _finish(cloud: PointCloud, pairs: np.ndarray, weighted: bool) -> NeighbourhoodGraph:
    pairs = np.sort(pairs.reshape(-1, 2), axis=1)
    pairs = np.unique(pairs, axis=0) if len(pairs) else pairs.reshape(0, 2)
    weights = None
    if weighted:
        weights = _edge_lengths(cloud.points, pairs)
        zero = int(np.count_nonzero(weights == 0))
        if zero:
            raise InvalidInput(f"{zero} weighted edges join coincident points")
    return NeighbourhoodGraph(cloud.n_points, pairs, weights)


def knn_graph(cloud: PointCloud, k: int, weighted: bool = False) -> NeighbourhoodGraph:
    """Build the k-nearest-neighbour graph.

    Nodes ``i`` and ``j`` are adjacent iff one of them is among the ``k``
    nearest neighbours of the other. Distance ties go to the smaller index.

    Args:
        cloud: Input points
        k: Neighbour count, ``1 <= k < N``
        weighted: Attach Euclidean edge lengths

    Returns:
        The symmetric k-nearest-neighbour graph
    """
    n = cloud.n_points
    if not 1 <= k < n:
        raise InvalidInput(f"k must satisfy 1 <= k < N={n}, got {k}")

    points = cloud.points
    chunks: List[np.ndarray] = []
    coincident = False
    for start, stop in _row_blocks(n, n):
        dist = cdist(points[start:stop], points)
        rows = np.arange(stop - start)
        dist[rows, start + rows] = np.inf
        coincident = coincident or bool(np.any(dist == 0.0))
        # stable sort keeps index order among equal distances
        nearest = np.argsort(dist, axis=1, kind="stable")[:, :k]
        sources = np.repeat(np.arange(start, stop), k)
        chunks.append(np.column_stack([sources, nearest.reshape(-1)]))

    if coincident:
        message = "point cloud has coincident points; neighbour ties resolved by index"
        logger.warning(message)
        warnings.warn(message, DegenerateInputWarning, stacklevel=2)

    graph = _finish(cloud, np.concatenate(chunks), weighted)
    logger.info(f"Built {k}-nearest-neighbour graph: {n} nodes, {graph.n_edges} edges")
    return graph


def epsilon_graph(cloud: PointCloud, epsilon: float, weighted: bool = False) -> NeighbourhoodGraph:
    """Build the epsilon-neighbourhood graph (closed ball, ``d <= epsilon``)."""
    if not epsilon > 0:
        raise InvalidInput(f"epsilon must be positive, got {epsilon}")

    n = cloud.n_points
    points = cloud.points
    chunks: List[np.ndarray] = []
    for start, stop in _row_blocks(n, n):
        dist = cdist(points[start:stop], points)
        rows, cols = np.nonzero(dist <= epsilon)
        rows = rows + start
        keep = rows < cols
        chunks.append(np.column_stack([rows[keep], cols[keep]]))

    graph = _finish(cloud, np.concatenate(chunks) if chunks else np.empty((0, 2)), weighted)
    logger.info(f"Built {epsilon}-neighbourhood graph: {n} nodes, {graph.n_edges} edges")
    return graph


def from_edge_list(n: int, edges: Iterable[Sequence[Any]]) -> NeighbourhoodGraph:
    """Ingest a given network.

    Args:
        n: Number of nodes
        edges: ``(i, j)`` or ``(i, j, weight)`` records with 0-based indices

    Returns:
        The network as a NeighbourhoodGraph; duplicate edges are collapsed
        (the first weight seen wins)

    Raises:
        IndexOutOfRange: If an endpoint is outside ``[0, n)``
        SelfLoop: If an edge joins a node to itself
    """
    if n < 1:
        raise InvalidInput("a graph needs at least one node")

    seen: Dict[Tuple[int, int], Optional[float]] = {}
    with_weight = 0
    total = 0
    for record in edges:
        if len(record) not in (2, 3):
            raise InvalidInput(f"edge records are (i, j[, weight]), got {record!r}")
        i, j = int(record[0]), int(record[1])
        if not (0 <= i < n and 0 <= j < n):
            raise IndexOutOfRange(f"edge ({i}, {j}) has an endpoint outside [0, {n})")
        if i == j:
            raise SelfLoop(f"edge ({i}, {j}) is a self-loop")
        weight = float(record[2]) if len(record) == 3 and record[2] is not None else None
        total += 1
        with_weight += weight is not None
        key = (min(i, j), max(i, j))
        if key not in seen:
            seen[key] = weight

    if with_weight not in (0, total):
        raise InvalidInput("a weight is required for every edge or for none")
    if len(seen) < total:
        logger.debug(f"Collapsed {total - len(seen)} duplicate edges")

    pairs = np.array(list(seen.keys()), dtype=np.int64).reshape(-1, 2)
    weights = None
    if with_weight:
        weights = np.array([seen[key] for key in seen], dtype=np.float64)
        if np.any(weights <= 0):
            raise InvalidInput("edge weights must be positive")
    return NeighbourhoodGraph(n, pairs, weights)


def build_graph(cloud: PointCloud, spec: GraphSpec) -> NeighbourhoodGraph:
    """Dispatch on ``spec.kind`` for point-cloud input."""
    if spec.kind == GraphKind.KNN:
        return knn_graph(cloud, spec.k, spec.weighted)
    if spec.kind == GraphKind.EPSILON:
        return epsilon_graph(cloud, spec.epsilon, spec.weighted)
    raise InvalidInput("external graphs are read from an edge list, not built from points")


def graph_summary(graph: NeighbourhoodGraph) -> Dict[str, Any]:
    degrees = graph.degrees
    return {
        "nodes": graph.n_nodes,
        "edges": graph.n_edges,
        "weighted": graph.weighted,
        "min_degree": int(degrees.min()),
        "mean_degree": float(degrees.mean()),
        "max_degree": int(degrees.max()),
        "components": graph.n_components,
    }


def short_circuit_edges(
    graph: NeighbourhoodGraph,
    cloud: PointCloud,
    ratio: float = 3.0,
) -> List[Tuple[int, int]]:
    """Edges that jump across the underlying manifold.

    An edge is flagged when the distance between its endpoints' intrinsic
    coordinates exceeds ``ratio`` times its ambient length, which is what
    inter-sheet edges on a noisy Swiss roll look like.
    """
    if cloud.intrinsic_coords is None:
        raise InvalidInput("short-circuit detection needs intrinsic coordinates")
    if cloud.n_points != graph.n_nodes:
        raise InvalidInput("point cloud and graph sizes differ")
    if graph.n_edges == 0:
        return []

    ambient = _edge_lengths(cloud.points, graph.edges)
    intrinsic = _edge_lengths(cloud.intrinsic_coords, graph.edges)
    flagged = intrinsic > ratio * ambient
    return [(int(i), int(j)) for i, j in graph.edges[flagged]]
