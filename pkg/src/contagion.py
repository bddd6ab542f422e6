"""Deterministic threshold contagions and the contagion maps built from them.

A realization starts from a seed set (a node and its neighbours) and updates
all node states synchronously: an inactive node activates at ``t + 1`` when
the fraction of its active neighbours at ``t`` is strictly above the
threshold. Realizations are propagated in blocks of seed columns with one
sparse product per step, and blocks run on a thread pool.
"""

import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, List, Optional, Tuple

import numpy as np
from loguru import logger

from .errors import IndexOutOfRange, InvalidInput, ZeroDegreeNodeWarning
from .schemas import ActivationMatrix, DissimilarityMatrix, NeighbourhoodGraph, symmetrize


class MapKind(str, Enum):
    """Which contagion map turns activation times into a dissimilarity."""
    SYMMETRIC = "symmetric"
    REGULAR = "regular"


@dataclass(frozen=True)
class ContagionConfig:
    """Parameters of one contagion sweep.

    Attributes:
        threshold: activation threshold T in [0, 1]
        max_steps: step cap, defaults to the node count
        block_size: seed columns propagated together
        threads: worker threads, ``None`` picks from the CPU count
    """
    threshold: float
    max_steps: Optional[int] = None
    block_size: int = 256
    threads: Optional[int] = None

    def __post_init__(self):
        if not 0.0 <= self.threshold <= 1.0:
            raise InvalidInput(f"threshold must lie in [0, 1], got {self.threshold}")
        if self.max_steps is not None and self.max_steps < 1:
            raise InvalidInput("max_steps must be positive")
        if self.block_size < 1:
            raise InvalidInput("block_size must be positive")
        if self.threads is not None and self.threads < 1:
            raise InvalidInput("threads must be positive")

    def steps_for(self, n_nodes: int) -> int:
        return self.max_steps if self.max_steps is not None else n_nodes

    def workers(self) -> int:
        return self.threads or min(8, os.cpu_count() or 1)


def _check_node(graph: NeighbourhoodGraph, node: int) -> int:
    node = int(node)
    if not 0 <= node < graph.n_nodes:
        raise IndexOutOfRange(f"node {node} outside [0, {graph.n_nodes})")
    return node


def seed_set(graph: NeighbourhoodGraph, j: int) -> np.ndarray:
    """Node ``j`` together with its immediate neighbours, sorted."""
    j = _check_node(graph, j)
    return np.union1d(graph.neighbours(j), [j]).astype(np.int64)


def _warn_zero_degree(graph: NeighbourhoodGraph) -> None:
    isolated = np.flatnonzero(graph.degrees == 0)
    if isolated.size:
        message = (
            f"{isolated.size} node(s) have degree 0 and only activate when seeded "
            f"(first: {isolated[:5].tolist()})"
        )
        logger.warning(message)
        warnings.warn(message, ZeroDegreeNodeWarning, stacklevel=3)


def _propagate(
    graph: NeighbourhoodGraph,
    threshold: float,
    max_steps: int,
    seeds: np.ndarray,
) -> Tuple[np.ndarray, int]:
    """Run one block of realizations.

    Args:
        graph: Network the contagions spread on
        threshold: Activation threshold
        max_steps: Step cap
        seeds: (N, B) boolean matrix, column b is the seed set of realization b

    Returns:
        (N, B) activation times with the ``2N`` sentinel, and the number of
        steps executed
    """
    n = graph.n_nodes
    adjacency = graph.sparse_adjacency
    degrees = graph.degrees.astype(np.float64)[:, None]
    has_neighbours = degrees > 0

    active = seeds.copy()
    times = np.where(active, 0, 2 * n).astype(np.int64)
    step = 0
    while step < max_steps:
        counts = np.asarray(adjacency @ active.astype(np.float64))
        fraction = np.divide(counts, degrees, out=np.zeros_like(counts), where=has_neighbours)
        # synchronous update from the states at step t
        newly = ~active & (fraction > threshold)
        if not newly.any():
            break
        step += 1
        times[newly] = step
        active |= newly
    else:
        if not active.all():
            logger.warning(f"contagion stopped at max_steps={max_steps} before quiescence")
    return times, step


def run_realization(
    graph: NeighbourhoodGraph,
    cfg: ContagionConfig,
    seeds: Iterable[int],
) -> np.ndarray:
    """Activation times of every node in the contagion started from ``seeds``.

    Nodes that never activate get ``2N``.
    """
    seeds = [_check_node(graph, s) for s in seeds]
    if not seeds:
        raise InvalidInput("a realization needs at least one seed")
    _warn_zero_degree(graph)

    column = np.zeros((graph.n_nodes, 1), dtype=bool)
    column[seeds, 0] = True
    times, steps = _propagate(graph, cfg.threshold, cfg.steps_for(graph.n_nodes), column)
    logger.debug(f"realization from {len(seeds)} seeds finished after {steps} steps")
    return times[:, 0]


def contagion_matrix(graph: NeighbourhoodGraph, cfg: ContagionConfig) -> ActivationMatrix:
    """Run one realization per node and collect the activation times.

    Entry ``x[i, j]`` is the activation time of node ``i`` in the realization
    seeded at ``seed_set(graph, j)``.
    """
    n = graph.n_nodes
    _warn_zero_degree(graph)
    max_steps = cfg.steps_for(n)
    seed_columns = graph.adjacency.copy()
    np.fill_diagonal(seed_columns, True)

    blocks: List[Tuple[int, int]] = [
        (start, min(n, start + cfg.block_size)) for start in range(0, n, cfg.block_size)
    ]

    def run_block(bounds: Tuple[int, int]) -> Tuple[np.ndarray, int]:
        start, stop = bounds
        return _propagate(graph, cfg.threshold, max_steps, seed_columns[:, start:stop])

    logger.info(
        f"Running {n} contagions at T={cfg.threshold} "
        f"({len(blocks)} blocks, {cfg.workers()} threads)"
    )
    x = np.empty((n, n), dtype=np.int64)
    steps = 0
    with ThreadPoolExecutor(max_workers=cfg.workers()) as pool:
        for (start, stop), (times, block_steps) in zip(blocks, pool.map(run_block, blocks)):
            x[:, start:stop] = times
            steps = max(steps, block_steps)

    never = int(np.count_nonzero(x == 2 * n))
    logger.debug(f"T={cfg.threshold}: {steps} steps, {never} never-activated entries")
    return ActivationMatrix(x, steps=steps)


def symmetric_contagion_map(x: ActivationMatrix) -> DissimilarityMatrix:
    """Node ``i`` maps to ``[x_1^(i) + x_i^(1), ..., x_N^(i) + x_i^(N)]``."""
    return symmetrize(x)


def contagion_dissimilarity(
    graph: NeighbourhoodGraph,
    cfg: ContagionConfig,
    map_kind: MapKind = MapKind.SYMMETRIC,
) -> DissimilarityMatrix:
    x = contagion_matrix(graph, cfg)
    if MapKind(map_kind) == MapKind.SYMMETRIC:
        return symmetric_contagion_map(x)
    return x.as_dissimilarity()
