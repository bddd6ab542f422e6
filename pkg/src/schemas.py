"""Shared data model for neighbourhood graphs, distance estimates and barcodes.

All containers are frozen dataclasses wrapping read-only numpy arrays, so they
can be shared between threads once built. Matrices are dense float64
(activation times are int64 and converted on demand).
"""

import math
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from typing import Iterable, List, NamedTuple, Optional, Set, Tuple, Union

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components
from scipy.spatial.distance import pdist, squareform

from .errors import InvalidInput

MatrixLike = Union[np.ndarray, "DissimilarityMatrix", "ActivationMatrix"]


class GraphKind(str, Enum):
    """How a neighbourhood graph was obtained."""
    KNN = "knn"
    EPSILON = "epsilon"
    EXTERNAL = "external"


class Variant(str, Enum):
    """Which matrix structural inference runs on."""
    DIRECT = "direct"
    POINTCLOUD = "pointcloud"
    BOTH = "both"


def _frozen(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class PointCloud:
    """N points in R^m, optionally with known base-geometry coordinates.

    Attributes:
        points: (N, m) coordinates
        intrinsic_coords: optional (N, q) reference coordinates, one row per point
    """
    points: np.ndarray
    intrinsic_coords: Optional[np.ndarray] = None

    def __post_init__(self):
        points = np.array(self.points, dtype=np.float64)
        if points.ndim == 1:
            points = points.reshape(-1, 1)
        if points.ndim != 2 or points.shape[0] < 1 or points.shape[1] < 1:
            raise InvalidInput(f"point cloud must be a non-empty (N, m) array, got shape {points.shape}")
        if not np.all(np.isfinite(points)):
            raise InvalidInput("point cloud contains non-finite coordinates")
        object.__setattr__(self, "points", _frozen(points))

        if self.intrinsic_coords is not None:
            coords = np.array(self.intrinsic_coords, dtype=np.float64)
            if coords.ndim == 1:
                coords = coords.reshape(-1, 1)
            if coords.shape[0] != points.shape[0]:
                raise InvalidInput(
                    f"intrinsic_coords has {coords.shape[0]} rows for {points.shape[0]} points"
                )
            if not np.all(np.isfinite(coords)):
                raise InvalidInput("intrinsic_coords contains non-finite values")
            object.__setattr__(self, "intrinsic_coords", _frozen(coords))

    @property
    def n_points(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def subset(self, indices: Iterable[int]) -> "PointCloud":
        idx = np.asarray(list(indices), dtype=np.int64)
        coords = None if self.intrinsic_coords is None else self.intrinsic_coords[idx]
        return PointCloud(self.points[idx], coords)


@dataclass(frozen=True, eq=False)
class NeighbourhoodGraph:
    """Undirected simple graph on ``n_nodes`` nodes.

    Edges are stored canonically as rows ``(i, j)`` with ``i < j`` in
    lexicographic order. ``weights`` is either ``None`` or holds one positive
    distance per edge.
    """
    n_nodes: int
    edges: np.ndarray
    weights: Optional[np.ndarray] = None

    def __post_init__(self):
        n = int(self.n_nodes)
        if n < 1:
            raise InvalidInput("a graph needs at least one node")
        edges = np.array(self.edges, dtype=np.int64).reshape(-1, 2)
        if edges.size and (edges.min() < 0 or edges.max() >= n):
            raise InvalidInput(f"edge endpoint outside [0, {n})")
        if np.any(edges[:, 0] == edges[:, 1]):
            raise InvalidInput("self-loops are not allowed")

        edges = np.sort(edges, axis=1)
        order = np.lexsort((edges[:, 1], edges[:, 0]))
        edges = edges[order]
        if len(edges) > 1 and np.any(np.all(edges[1:] == edges[:-1], axis=1)):
            raise InvalidInput("duplicate edges are not allowed")

        weights = self.weights
        if weights is not None:
            weights = np.array(weights, dtype=np.float64).reshape(-1)[order]
            if weights.shape[0] != edges.shape[0]:
                raise InvalidInput("a weight is required for every edge or for none")
            if not np.all(np.isfinite(weights)) or np.any(weights <= 0):
                raise InvalidInput("edge weights must be finite and positive")
            weights = _frozen(weights)

        object.__setattr__(self, "n_nodes", n)
        object.__setattr__(self, "edges", _frozen(edges))
        object.__setattr__(self, "weights", weights)

    @property
    def n_edges(self) -> int:
        return self.edges.shape[0]

    @property
    def weighted(self) -> bool:
        return self.weights is not None

    @cached_property
    def adjacency(self) -> np.ndarray:
        """Binary symmetric adjacency matrix A."""
        a = np.zeros((self.n_nodes, self.n_nodes), dtype=bool)
        a[self.edges[:, 0], self.edges[:, 1]] = True
        a[self.edges[:, 1], self.edges[:, 0]] = True
        return _frozen(a)

    @cached_property
    def sparse_adjacency(self) -> sparse.csr_matrix:
        """CSR view of A used to propagate contagions."""
        rows = np.concatenate([self.edges[:, 0], self.edges[:, 1]])
        cols = np.concatenate([self.edges[:, 1], self.edges[:, 0]])
        data = np.ones(rows.shape[0], dtype=np.float64)
        return sparse.csr_matrix((data, (rows, cols)), shape=(self.n_nodes, self.n_nodes))

    @cached_property
    def degrees(self) -> np.ndarray:
        deg = np.bincount(self.edges.reshape(-1), minlength=self.n_nodes).astype(np.int64)
        return _frozen(deg)

    @cached_property
    def n_components(self) -> int:
        count, _ = connected_components(self.sparse_adjacency, directed=False)
        return int(count)

    def neighbours(self, node: int) -> np.ndarray:
        return np.flatnonzero(self.adjacency[node])

    def weight_matrix(self) -> np.ndarray:
        """Dense matrix of edge lengths with ``inf`` marking non-edges."""
        w = np.full((self.n_nodes, self.n_nodes), np.inf)
        np.fill_diagonal(w, 0.0)
        values = self.weights if self.weighted else np.ones(self.n_edges)
        w[self.edges[:, 0], self.edges[:, 1]] = values
        w[self.edges[:, 1], self.edges[:, 0]] = values
        return w

    def edge_set(self) -> Set[Tuple[int, int]]:
        return {(int(i), int(j)) for i, j in self.edges}

    def unweighted(self) -> "NeighbourhoodGraph":
        return NeighbourhoodGraph(self.n_nodes, self.edges)


@dataclass(frozen=True, eq=False)
class DissimilarityMatrix:
    """N x N matrix of nonnegative, finite distance estimates with zero diagonal."""
    d: np.ndarray

    def __post_init__(self):
        d = np.array(self.d, dtype=np.float64)
        if d.ndim != 2 or d.shape[0] != d.shape[1] or d.shape[0] < 1:
            raise InvalidInput(f"dissimilarity matrix must be square, got shape {d.shape}")
        if not np.all(np.isfinite(d)):
            raise InvalidInput("dissimilarity matrix entries must be finite")
        if np.any(d < 0):
            raise InvalidInput("dissimilarity matrix entries must be nonnegative")
        if np.any(np.diag(d) != 0):
            raise InvalidInput("dissimilarity matrix must have a zero diagonal")
        object.__setattr__(self, "d", _frozen(d))

    @property
    def n(self) -> int:
        return self.d.shape[0]

    @property
    def is_symmetric(self) -> bool:
        return bool(np.array_equal(self.d, self.d.T))

    def subset(self, indices: Iterable[int]) -> "DissimilarityMatrix":
        idx = np.asarray(list(indices), dtype=np.int64)
        return DissimilarityMatrix(self.d[np.ix_(idx, idx)])


@dataclass(frozen=True, eq=False)
class ActivationMatrix:
    """Activation times of every node in every node-seeded realization.

    ``x[i, j]`` is the activation time of node ``i`` in the realization seeded
    around node ``j``; column ``j`` is one realization. Nodes that never
    activate carry the sentinel ``2N``.
    """
    x: np.ndarray
    steps: int = 0

    def __post_init__(self):
        x = np.array(self.x, dtype=np.int64)
        if x.ndim != 2 or x.shape[0] != x.shape[1] or x.shape[0] < 1:
            raise InvalidInput(f"activation matrix must be square, got shape {x.shape}")
        if np.any(x < 0):
            raise InvalidInput("activation times must be nonnegative")
        if np.any(np.diag(x) != 0):
            raise InvalidInput("every seed node is active at t=0")
        object.__setattr__(self, "x", _frozen(x))

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def sentinel(self) -> int:
        return 2 * self.n

    def regular_map(self, node: int) -> np.ndarray:
        """Image of ``node`` under the regular contagion map (its activation
        time in each realization)."""
        return self.x[node].copy()

    def as_dissimilarity(self) -> DissimilarityMatrix:
        """D_cont with columns holding regular-map images."""
        return DissimilarityMatrix(self.x.T.astype(np.float64))


class Interval(NamedTuple):
    """One persistence interval; ``death`` is ``inf`` for essential classes."""
    dim: int
    birth: float
    death: float

    @property
    def persistence(self) -> float:
        return self.death - self.birth

    @property
    def is_infinite(self) -> bool:
        return math.isinf(self.death)

    @property
    def is_zero_length(self) -> bool:
        return self.death == self.birth


@dataclass(frozen=True)
class Barcode:
    """Multiset of persistence intervals in dimensions ``0..max_dim``."""
    intervals: Tuple[Interval, ...]
    max_dim: int = 1
    zero_length_reported: bool = True

    def __post_init__(self):
        intervals = tuple(Interval(int(i[0]), float(i[1]), float(i[2])) for i in self.intervals)
        for interval in intervals:
            if interval.birth > interval.death:
                raise InvalidInput(f"interval born after it dies: {interval}")
            if not 0 <= interval.dim <= self.max_dim:
                raise InvalidInput(f"interval dimension {interval.dim} exceeds max_dim={self.max_dim}")
        ordered = tuple(sorted(intervals, key=lambda i: (i.dim, i.birth, i.death)))
        object.__setattr__(self, "intervals", ordered)

    def in_dim(self, dim: int) -> List[Interval]:
        return [i for i in self.intervals if i.dim == dim]

    def finite_persistences(self, dim: int, include_zero: bool = False) -> np.ndarray:
        values = [
            i.persistence for i in self.in_dim(dim)
            if not i.is_infinite and (include_zero or not i.is_zero_length)
        ]
        return np.array(sorted(values, reverse=True), dtype=np.float64)


def _as_array(matrix: MatrixLike) -> np.ndarray:
    if isinstance(matrix, DissimilarityMatrix):
        return matrix.d
    if isinstance(matrix, ActivationMatrix):
        return matrix.x.astype(np.float64)
    return np.asarray(matrix, dtype=np.float64)


def symmetrize(x: Union[ActivationMatrix, np.ndarray]) -> DissimilarityMatrix:
    """Return ``x + x^T``; sentinel entries are kept as they are."""
    array = _as_array(x)
    if array.ndim != 2 or array.shape[0] != array.shape[1]:
        raise InvalidInput(f"symmetrize needs a square matrix, got shape {array.shape}")
    return DissimilarityMatrix(array + array.T)


def p_dist(matrix: MatrixLike) -> DissimilarityMatrix:
    """Euclidean distances between the columns of ``matrix``.

    The result is the distance matrix of the point cloud whose coordinate
    vectors are the columns of the input.
    """
    array = _as_array(matrix)
    if array.ndim != 2:
        raise InvalidInput("p_dist needs a two-dimensional matrix")
    if not np.all(np.isfinite(array)):
        raise InvalidInput("p_dist needs finite entries")
    if array.shape[1] == 1:
        return DissimilarityMatrix(np.zeros((1, 1)))
    return DissimilarityMatrix(squareform(pdist(array.T, metric="euclidean"), checks=False))


def upper_triangle(matrix: MatrixLike) -> np.ndarray:
    """Strict upper triangle in row-major order (the canonical pair order)."""
    array = _as_array(matrix)
    rows, cols = np.triu_indices(array.shape[0], k=1)
    return array[rows, cols]
