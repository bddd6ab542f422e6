"""Vietoris-Rips persistent homology over the field with two elements.

Two backends compute the same barcodes:

* ``native`` enumerates the filtered complex and reduces its boundary matrix
  with the clearing optimization. Columns are Python integers used as bit
  sets, so it is exact and reports zero-length intervals, but it only scales
  to a few hundred points.
* ``ripser`` hands the matrix to the ripser library for large inputs.
  Ripser does not report zero-length intervals.
"""

import math
from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from loguru import logger

from .errors import CapacityExceeded, InvalidInput
from .schemas import Barcode, DissimilarityMatrix, Interval

DEFAULT_MEMORY_BUDGET = 200_000_000
DEFAULT_NATIVE_MAX_POINTS = 100


class Backend(str, Enum):
    AUTO = "auto"
    NATIVE = "native"
    RIPSER = "ripser"


class SubsampleStrategy(str, Enum):
    MAXMIN = "maxmin"
    UNIFORM = "uniform"


@dataclass(frozen=True)
class VRConfig:
    """Parameters of a Vietoris-Rips persistence computation.

    Attributes:
        max_dim: highest homology dimension reported (0, 1 or 2)
        max_filtration: filtration cap; ``None`` uses the full filtration when
            it fits ``memory_budget`` and twice the minimax radius otherwise
        subsample: number of points kept before computing, or ``None``
        subsample_strategy: maxmin (farthest point) or uniform
        seed: RNG seed for subsampling
        backend: auto, native or ripser
        memory_budget: maximum number of simplices
        native_max_points: largest input auto sends to the native backend
    """
    max_dim: int = 1
    max_filtration: Optional[float] = None
    subsample: Optional[int] = None
    subsample_strategy: SubsampleStrategy = SubsampleStrategy.MAXMIN
    seed: int = 0
    backend: Backend = Backend.AUTO
    memory_budget: int = DEFAULT_MEMORY_BUDGET
    native_max_points: int = DEFAULT_NATIVE_MAX_POINTS

    def __post_init__(self):
        object.__setattr__(self, "backend", Backend(self.backend))
        object.__setattr__(self, "subsample_strategy", SubsampleStrategy(self.subsample_strategy))
        if self.max_dim not in (0, 1, 2):
            raise InvalidInput(f"max_dim must be 0, 1 or 2, got {self.max_dim}")
        if self.max_filtration is not None and not self.max_filtration >= 0:
            raise InvalidInput("max_filtration must be nonnegative")
        if self.subsample is not None and self.subsample < 1:
            raise InvalidInput("subsample count must be positive")
        if self.memory_budget < 1:
            raise InvalidInput("memory_budget must be positive")


def minimax_radius(d: DissimilarityMatrix) -> float:
    """Smallest scale at which the Rips graph is connected.

    This is the longest edge of a minimum spanning tree (Prim's algorithm on
    the dense matrix).
    """
    n = d.n
    if n == 1:
        return 0.0
    in_tree = np.zeros(n, dtype=bool)
    in_tree[0] = True
    best = d.d[0].copy()
    longest = 0.0
    for _ in range(n - 1):
        candidates = np.where(in_tree, np.inf, best)
        nxt = int(np.argmin(candidates))
        longest = max(longest, float(candidates[nxt]))
        in_tree[nxt] = True
        best = np.minimum(best, d.d[nxt])
    return longest


def subsample(
    d: DissimilarityMatrix,
    count: int,
    strategy: SubsampleStrategy = SubsampleStrategy.MAXMIN,
    seed: int = 0,
) -> np.ndarray:
    """Pick ``count`` point indices, returned sorted.

    maxmin starts from a seeded random point and repeatedly adds the point
    farthest from those already chosen; uniform draws without replacement.
    """
    n = d.n
    if not 1 <= count <= n:
        raise InvalidInput(f"subsample count must satisfy 1 <= count <= N={n}, got {count}")
    rng = np.random.default_rng(seed)
    if SubsampleStrategy(strategy) == SubsampleStrategy.UNIFORM:
        return np.sort(rng.choice(n, size=count, replace=False))

    chosen = [int(rng.integers(n))]
    nearest = d.d[chosen[0]].copy()
    for _ in range(count - 1):
        nxt = int(np.argmax(nearest))
        chosen.append(nxt)
        nearest = np.minimum(nearest, d.d[nxt])
    return np.sort(np.array(chosen, dtype=np.int64))


def _full_simplex_count(n: int, max_dim: int) -> int:
    return sum(math.comb(n, k) for k in range(1, max_dim + 3))


def _simplex_estimate(d: DissimilarityMatrix, threshold: float, max_dim: int) -> int:
    """Upper bound on the simplex count at ``threshold``.

    Every k-simplex is counted k+1 times by ``sum_i C(deg_i, k)``.
    """
    adjacent = d.d <= threshold
    np.fill_diagonal(adjacent, False)
    degrees = adjacent.sum(axis=1)
    total = d.n + int(degrees.sum()) // 2
    for k in range(2, max_dim + 2):
        total += sum(math.comb(int(deg), k) for deg in degrees) // (k + 1)
    return total


def _resolve_threshold(d: DissimilarityMatrix, cfg: VRConfig) -> float:
    if cfg.max_filtration is not None:
        return float(cfg.max_filtration)
    if _full_simplex_count(d.n, cfg.max_dim) <= cfg.memory_budget:
        return math.inf
    radius = minimax_radius(d)
    logger.warning(
        f"full Rips filtration on {d.n} points exceeds the simplex budget; "
        f"capping at twice the minimax radius ({2 * radius:g})"
    )
    return 2.0 * radius


class _FilteredComplex:
    """Simplices of a capped Rips complex in filtration order.

    Order is (value, dimension, vertices); ``faces[k]`` holds, for every
    k-simplex, the filtration indices of its (k-1)-faces.
    """

    def __init__(self, d: DissimilarityMatrix, threshold: float, top_dim: int, budget: int):
        n = d.n
        self.n = n
        adjacent = d.d <= threshold
        np.fill_diagonal(adjacent, False)

        by_dim: List[np.ndarray] = [np.arange(n, dtype=np.int64).reshape(-1, 1)]
        values: List[np.ndarray] = [np.zeros(n)]
        total = n
        for k in range(1, top_dim + 1):
            cofaces = self._extend(by_dim[-1], adjacent)
            total += cofaces.shape[0]
            if total > budget:
                raise CapacityExceeded(
                    f"Rips complex on {n} points exceeds {budget} simplices; "
                    "subsample or lower max_filtration"
                )
            by_dim.append(cofaces)
            values.append(self._values(d.d, cofaces))

        dims = np.concatenate([np.full(len(s), k) for k, s in enumerate(by_dim)])
        vals = np.concatenate(values)
        width = top_dim + 1
        padded = np.concatenate([
            np.pad(s, ((0, 0), (0, width - s.shape[1])), constant_values=-1) for s in by_dim
        ])
        keys = [padded[:, c] for c in reversed(range(width))] + [dims, vals]
        order = np.lexsort(keys)
        position = np.empty_like(order)
        position[order] = np.arange(order.size)

        self.dims = dims[order]
        self.values = vals[order]
        offsets = np.cumsum([0] + [len(s) for s in by_dim])
        self.index: List[np.ndarray] = [position[offsets[k]:offsets[k + 1]] for k in range(len(by_dim))]
        self.faces: List[Optional[np.ndarray]] = [None]
        codes = [self._encode(s) for s in by_dim]
        for k in range(1, len(by_dim)):
            self.faces.append(self._face_indices(by_dim[k], codes[k - 1], self.index[k - 1]))

    @staticmethod
    def _extend(simplices: np.ndarray, adjacent: np.ndarray) -> np.ndarray:
        """All (k+1)-cliques extending each k-clique by a larger vertex."""
        n = adjacent.shape[0]
        out: List[np.ndarray] = []
        upper = np.triu(adjacent, k=1)
        for simplex in simplices:
            common = upper[simplex[-1]].copy()
            for v in simplex[:-1]:
                common &= adjacent[v]
            extra = np.flatnonzero(common)
            if extra.size:
                out.append(np.column_stack([np.tile(simplex, (extra.size, 1)), extra]))
        if not out:
            return np.empty((0, simplices.shape[1] + 1), dtype=np.int64)
        return np.concatenate(out).astype(np.int64)

    @staticmethod
    def _values(dist: np.ndarray, simplices: np.ndarray) -> np.ndarray:
        value = np.zeros(simplices.shape[0])
        width = simplices.shape[1]
        for a in range(width):
            for b in range(a + 1, width):
                value = np.maximum(value, dist[simplices[:, a], simplices[:, b]])
        return value

    def _encode(self, simplices: np.ndarray) -> np.ndarray:
        code = np.zeros(simplices.shape[0], dtype=np.int64)
        for c in range(simplices.shape[1]):
            code = code * self.n + simplices[:, c]
        return code

    def _face_indices(self, simplices: np.ndarray, face_codes: np.ndarray, face_index: np.ndarray) -> np.ndarray:
        order = np.argsort(face_codes)
        sorted_codes = face_codes[order]
        width = simplices.shape[1]
        columns = []
        for drop in range(width):
            face = np.delete(simplices, drop, axis=1)
            slot = np.searchsorted(sorted_codes, self._encode(face))
            columns.append(face_index[order[slot]])
        return np.column_stack(columns)


def _native_barcode(d: DissimilarityMatrix, threshold: float, max_dim: int, budget: int) -> Barcode:
    top = min(max_dim + 1, d.n - 1)
    cplx = _FilteredComplex(d, threshold, top, budget)
    logger.debug(f"native reduction over {cplx.dims.size} simplices (top dimension {top})")

    pairs: List[Tuple[int, int]] = []
    lows = set()
    negative = set()
    for k in range(top, 0, -1):
        owner: Dict[int, int] = {}
        reduced: Dict[int, int] = {}
        columns = np.sort(cplx.index[k])
        rows = np.empty(cplx.dims.size, dtype=np.int64)
        rows[cplx.index[k]] = np.arange(cplx.index[k].size)
        for j in columns:
            j = int(j)
            if j in lows:
                continue  # cleared: j already kills a class one dimension up
            col = 0
            for face in cplx.faces[k][rows[j]]:
                col ^= 1 << int(face)
            while col:
                low = col.bit_length() - 1
                if low not in owner:
                    break
                col ^= reduced[owner[low]]
            if col:
                low = col.bit_length() - 1
                owner[low] = j
                reduced[j] = col
                lows.add(low)
                negative.add(j)
                pairs.append((low, j))

    intervals: List[Interval] = []
    for low, j in pairs:
        dim = int(cplx.dims[low])
        if dim <= max_dim:
            intervals.append(Interval(dim, float(cplx.values[low]), float(cplx.values[j])))
    for k in range(0, min(max_dim, top) + 1):
        for s in cplx.index[k]:
            s = int(s)
            if s not in negative and s not in lows:
                intervals.append(Interval(k, float(cplx.values[s]), math.inf))
    return Barcode(tuple(intervals), max_dim=max_dim, zero_length_reported=True)


def _ripser_barcode(d: DissimilarityMatrix, threshold: float, max_dim: int) -> Barcode:
    from ripser import ripser

    result = ripser(d.d, distance_matrix=True, maxdim=max_dim, thresh=threshold, coeff=2)
    intervals = [
        Interval(dim, float(birth), float(death))
        for dim, diagram in enumerate(result["dgms"])
        for birth, death in diagram
    ]
    return Barcode(tuple(intervals), max_dim=max_dim, zero_length_reported=False)


def vr_persistence(d: DissimilarityMatrix, cfg: VRConfig = VRConfig()) -> Barcode:
    """Barcode of the Vietoris-Rips filtration of ``d``.

    A simplex enters at the largest pairwise entry among its vertices.

    Args:
        d: Symmetric dissimilarity matrix
        cfg: Dimension bound, filtration cap, subsampling and backend

    Returns:
        Intervals in dimensions ``0..cfg.max_dim``

    Raises:
        CapacityExceeded: If the complex outgrows ``cfg.memory_budget``
    """
    if not d.is_symmetric:
        raise InvalidInput("Vietoris-Rips persistence needs a symmetric matrix")
    if cfg.subsample is not None and cfg.subsample < d.n:
        keep = subsample(d, cfg.subsample, cfg.subsample_strategy, cfg.seed)
        logger.info(f"subsampled {cfg.subsample} of {d.n} points ({cfg.subsample_strategy.value})")
        d = d.subset(keep)

    threshold = _resolve_threshold(d, cfg)
    estimate = _simplex_estimate(d, threshold, cfg.max_dim)
    if estimate > cfg.memory_budget:
        raise CapacityExceeded(
            f"Rips complex on {d.n} points may reach {estimate} simplices "
            f"(budget {cfg.memory_budget}); subsample or lower max_filtration"
        )

    backend = cfg.backend
    if backend == Backend.AUTO:
        backend = Backend.NATIVE if d.n <= cfg.native_max_points else Backend.RIPSER

    logger.info(f"VR persistence on {d.n} points, max_dim={cfg.max_dim}, backend={backend.value}")
    if backend == Backend.RIPSER:
        barcode = _ripser_barcode(d, threshold, cfg.max_dim)
    else:
        barcode = _native_barcode(d, threshold, cfg.max_dim, cfg.memory_budget)

    zero = sum(1 for i in barcode.intervals if i.is_zero_length)
    if zero:
        logger.debug(f"{zero} zero-length intervals in barcode")
    return barcode


def dominant_bars(b: Barcode, dim: int, ratio: float = 3.0) -> int:
    """Number of bars that stand out from the rest of the dimension.

    Finite, nonzero-length bars are sorted by persistence ``p_1 >= p_2 >= ...``.
    Nothing is dominant unless ``p_1 > ratio * median``. Otherwise the answer
    is the first m (from the top) with ``p_m >= ratio * p_{m+1}``, or 0 when
    the lengths decay without such a gap. A lone bar is dominant.
    """
    if not ratio > 1:
        raise InvalidInput(f"ratio must exceed 1, got {ratio}")
    lengths = b.finite_persistences(dim)
    count = lengths.size
    if count <= 1:
        return count
    if not lengths[0] > ratio * float(np.median(lengths)):
        return 0
    for m in range(1, count):
        if lengths[m - 1] >= ratio * lengths[m]:
            return m
    return 0


def barcode_summary(b: Barcode, ratio: float = 3.0) -> Dict[str, Any]:
    summary: Dict[str, Any] = {"zero_length_reported": b.zero_length_reported, "dimensions": {}}
    for dim in range(b.max_dim + 1):
        bars = b.in_dim(dim)
        finite = b.finite_persistences(dim)
        summary["dimensions"][str(dim)] = {
            "bars": len(bars),
            "infinite": sum(1 for i in bars if i.is_infinite),
            "zero_length": sum(1 for i in bars if i.is_zero_length),
            "longest_finite": float(finite[0]) if finite.size else 0.0,
            "dominant": dominant_bars(b, dim, ratio),
        }
    return summary
