"""Synthetic benchmark data: Swiss rolls, torus networks and reference clouds.

All randomness flows through ``numpy.random.default_rng(seed)``; the same
spec and seed always produce the same output.
"""

import math
from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Optional, Set, Tuple

import numpy as np
from loguru import logger
from scipy import optimize
from sklearn.datasets import make_swiss_roll

from .errors import InvalidInput, MatchingFailure
from .schemas import DissimilarityMatrix, NeighbourhoodGraph, PointCloud

DEFAULT_T_RANGE = (1.5 * math.pi, 4.5 * math.pi)
MOORE_OFFSETS = [(dx, dy) for dx in (-1, 0, 1) for dy in (-1, 0, 1) if (dx, dy) != (0, 0)]


class NoiseScale(str, Enum):
    """Reference power for the S/N ratio of added noise.

    unit: variance ``10 ** (-snr / 10)`` per coordinate
    signal: the same ratio applied to the cloud's mean per-coordinate variance
    """
    UNIT = "unit"
    SIGNAL = "signal"


class RollSampling(str, Enum):
    """How random Swiss-roll points are drawn."""
    AREA = "area"
    PARAMETER = "parameter"


class Matching(str, Enum):
    """How non-geometric edges are drawn."""
    STUB = "stub"
    INDEPENDENT = "independent"


@dataclass(frozen=True)
class SwissRollSpec:
    """Regularly spaced Swiss roll.

    Attributes:
        density: points per unit of intrinsic area
        t_range: spiral parameter interval ``(t0, t1)``
        height: extent of the flat direction
        snr: signal-to-noise ratio in dB, ``None`` for a noise-free sample
        rng_seed: seed for the noise
    """
    density: float = 50.0
    t_range: Tuple[float, float] = DEFAULT_T_RANGE
    height: float = 21.0
    snr: Optional[float] = None
    rng_seed: int = 0

    def __post_init__(self):
        t0, t1 = self.t_range
        if not self.density > 0:
            raise InvalidInput("density must be positive")
        if not t1 > t0 > 0:
            raise InvalidInput(f"t_range must satisfy t1 > t0 > 0, got {self.t_range}")
        if not self.height > 0:
            raise InvalidInput("height must be positive")
        object.__setattr__(self, "t_range", (float(t0), float(t1)))


@dataclass(frozen=True)
class TorusNetSpec:
    """Noisy geometric network on an ``n x n`` periodic grid.

    Attributes:
        n: grid side, ``N = n * n`` nodes
        d_ng: non-geometric edges per node
        rng_seed: seed for the non-geometric edges
        matching: stub (exact per-node degree) or independent endpoint draws
        max_restarts: stub-matching restarts before giving up
    """
    n: int
    d_ng: int = 0
    rng_seed: int = 0
    matching: Matching = Matching.STUB
    max_restarts: int = 50

    def __post_init__(self):
        object.__setattr__(self, "matching", Matching(self.matching))
        if self.n < 5:
            raise InvalidInput(f"torus grid side must be at least 5, got {self.n}")
        n_nodes = self.n * self.n
        if not 0 <= self.d_ng < n_nodes - 9:
            raise InvalidInput(f"d_ng must satisfy 0 <= d_ng < N - 9 = {n_nodes - 9}")
        if self.matching == Matching.STUB and (n_nodes * self.d_ng) % 2:
            raise InvalidInput("stub matching needs an even number of stubs (N * d_ng)")


def arc_length(t: np.ndarray) -> np.ndarray:
    """Length of the spiral ``(t cos t, t sin t)`` from 0 to ``t``."""
    t = np.asarray(t, dtype=np.float64)
    return 0.5 * (t * np.sqrt(1.0 + t * t) + np.arcsinh(t))


def _invert_arc_length(s: np.ndarray) -> np.ndarray:
    return optimize.newton(
        lambda t: arc_length(t) - s,
        np.sqrt(2.0 * s),
        fprime=lambda t: np.sqrt(1.0 + t * t),
        tol=1e-12,
        maxiter=100,
    )


def _roll(t: np.ndarray, h: np.ndarray) -> np.ndarray:
    return np.column_stack([t * np.cos(t), h, t * np.sin(t)])


def swiss_roll_regular(spec: SwissRollSpec) -> PointCloud:
    """Points ``(t cos t, h, t sin t)`` on a grid that is regular in arc
    length and height, with spacing ``1 / sqrt(density)``.

    ``intrinsic_coords`` holds ``(s, h)`` with ``s`` measured from ``t0``.
    Noise is added when ``spec.snr`` is set.
    """
    t0, t1 = spec.t_range
    spacing = 1.0 / math.sqrt(spec.density)
    s0, s1 = float(arc_length(t0)), float(arc_length(t1))
    s = s0 + spacing * np.arange(math.floor((s1 - s0) / spacing + 1e-9) + 1)
    h = spacing * np.arange(math.floor(spec.height / spacing + 1e-9) + 1)
    t = _invert_arc_length(s)

    tt, hh = np.meshgrid(t, h, indexing="ij")
    ss, _ = np.meshgrid(s - s0, h, indexing="ij")
    cloud = PointCloud(_roll(tt.ravel(), hh.ravel()), np.column_stack([ss.ravel(), hh.ravel()]))
    logger.info(f"Swiss roll: {len(s)} x {len(h)} grid, {cloud.n_points} points")

    if spec.snr is not None:
        cloud = add_gaussian_noise(cloud, spec.snr, spec.rng_seed)
    return cloud


def swiss_roll_uniform(
    n_points: int,
    rng_seed: int,
    t_range: Tuple[float, float] = DEFAULT_T_RANGE,
    height: float = 21.0,
    sampling: RollSampling = RollSampling.AREA,
) -> PointCloud:
    """Random Swiss roll of ``n_points`` points.

    area draws ``(s, h)`` uniformly over the rolled sheet, so the point
    density is constant on the surface. parameter draws ``(t, h)`` uniformly
    via scikit-learn (mapped linearly onto ``t_range``), which crowds points
    towards the centre of the spiral.
    """
    if n_points < 1:
        raise InvalidInput("n_points must be positive")
    t0, t1 = t_range
    if not t1 > t0 > 0:
        raise InvalidInput(f"t_range must satisfy t1 > t0 > 0, got {t_range}")

    if RollSampling(sampling) == RollSampling.AREA:
        rng = np.random.default_rng(rng_seed)
        s = rng.uniform(float(arc_length(t0)), float(arc_length(t1)), size=n_points)
        h = rng.uniform(0.0, height, size=n_points)
        t = np.atleast_1d(_invert_arc_length(s))
    else:
        raw, t = make_swiss_roll(n_samples=n_points, noise=0.0, random_state=rng_seed)
        lo, hi = DEFAULT_T_RANGE
        t = t0 + (t - lo) * (t1 - t0) / (hi - lo)
        h = raw[:, 1] * (height / 21.0)
    s = arc_length(t) - arc_length(t0)
    return PointCloud(_roll(t, h), np.column_stack([s, h]))


def noise_sigma(cloud: PointCloud, snr: float, scale: NoiseScale = NoiseScale.UNIT) -> float:
    """Per-coordinate noise standard deviation for a ratio of ``snr`` dB."""
    ratio = 10.0 ** (-snr / 10.0)
    if NoiseScale(scale) == NoiseScale.SIGNAL:
        ratio *= float(np.mean(np.var(cloud.points, axis=0)))
    return math.sqrt(ratio)


def add_gaussian_noise(
    cloud: PointCloud,
    snr: float,
    rng_seed: int,
    scale: NoiseScale = NoiseScale.UNIT,
) -> PointCloud:
    """Perturb every coordinate by independent ``N(0, sigma^2)`` noise with
    ``sigma`` from :func:`noise_sigma`."""
    sigma = noise_sigma(cloud, snr, scale)
    rng = np.random.default_rng(rng_seed)
    noise = rng.normal(0.0, sigma, size=cloud.points.shape)
    logger.debug(f"adding Gaussian noise at S/N={snr} dB ({NoiseScale(scale).value} scale, sigma={sigma:.3g})")
    return PointCloud(cloud.points + noise, cloud.intrinsic_coords)


def _node(n: int, x: int, y: int) -> int:
    return (x % n) * n + (y % n)


def _geometric_edges(n: int) -> Set[Tuple[int, int]]:
    edges = set()
    for x in range(n):
        for y in range(n):
            a = _node(n, x, y)
            for dx, dy in MOORE_OFFSETS:
                b = _node(n, x + dx, y + dy)
                edges.add((min(a, b), max(a, b)))
    return edges


def _stub_matching(
    n_nodes: int,
    d_ng: int,
    forbidden: Set[Tuple[int, int]],
    rng: np.random.Generator,
    max_restarts: int,
) -> List[Tuple[int, int]]:
    """Pair ``d_ng`` stubs per node into a simple graph avoiding ``forbidden``.

    Invalid pairs (self-loops, repeats, geometric edges) are repaired with
    degree-preserving double-edge swaps; a run that cannot be repaired is
    restarted from a fresh shuffle.
    """
    stubs = np.repeat(np.arange(n_nodes), d_ng)
    swap_budget = 50 * len(stubs) + 100

    def valid(a: int, b: int, taken: Set[Tuple[int, int]]) -> bool:
        key = (min(a, b), max(a, b))
        return a != b and key not in forbidden and key not in taken

    for attempt in range(max_restarts):
        pairs = rng.permutation(stubs).reshape(-1, 2).tolist()
        taken: Set[Tuple[int, int]] = set()
        good: List[int] = []
        bad: List[int] = []
        for idx, (a, b) in enumerate(pairs):
            if valid(a, b, taken):
                taken.add((min(a, b), max(a, b)))
                good.append(idx)
            else:
                bad.append(idx)

        swaps = 0
        while bad and good and swaps < swap_budget:
            swaps += 1
            idx = bad[-1]
            a, b = pairs[idx]
            pick = int(rng.integers(len(good)))
            c, d = pairs[good[pick]]
            if rng.random() < 0.5:
                c, d = d, c
            taken.discard((min(c, d), max(c, d)))
            first, second = (min(a, c), max(a, c)), (min(b, d), max(b, d))
            if valid(a, c, taken) and valid(b, d, taken) and first != second:
                taken.update([first, second])
                pairs[idx] = [a, c]
                pairs[good[pick]] = [b, d]
                good.append(bad.pop())
            else:
                taken.add((min(c, d), max(c, d)))

        if not bad:
            return [(min(a, b), max(a, b)) for a, b in pairs]
        logger.debug(f"stub matching attempt {attempt + 1} left {len(bad)} invalid pairs; restarting")

    raise MatchingFailure(
        f"could not match {d_ng} non-geometric stubs per node on {n_nodes} nodes "
        f"after {max_restarts} restarts"
    )


def _independent_draws(
    n_nodes: int,
    d_ng: int,
    forbidden: Set[Tuple[int, int]],
    rng: np.random.Generator,
) -> List[Tuple[int, int]]:
    """Every node draws ``d_ng`` new partners uniformly at random."""
    partners: Dict[int, Set[int]] = {a: set() for a in range(n_nodes)}
    for i, j in forbidden:
        partners[i].add(j)
        partners[j].add(i)

    taken: Set[Tuple[int, int]] = set()
    for a in range(n_nodes):
        blocked = np.zeros(n_nodes, dtype=bool)
        blocked[a] = True
        blocked[list(partners[a])] = True
        candidates = np.flatnonzero(~blocked)
        if candidates.size < d_ng:
            raise MatchingFailure(f"node {a} has only {candidates.size} admissible partners")
        for b in rng.choice(candidates, size=d_ng, replace=False):
            b = int(b)
            taken.add((min(a, b), max(a, b)))
            partners[a].add(b)
            partners[b].add(a)
    return sorted(taken)


def torus_network(spec: TorusNetSpec) -> NeighbourhoodGraph:
    """Moore-neighbourhood torus grid plus random non-geometric edges.

    Node ``x * n + y`` sits at grid position ``(x, y)``, matching
    ``torus_reference``.
    """
    n_nodes = spec.n * spec.n
    geometric = _geometric_edges(spec.n)
    rng = np.random.default_rng(spec.rng_seed)

    extra: List[Tuple[int, int]] = []
    if spec.d_ng:
        if spec.matching == Matching.STUB:
            extra = _stub_matching(n_nodes, spec.d_ng, geometric, rng, spec.max_restarts)
        else:
            extra = _independent_draws(n_nodes, spec.d_ng, geometric, rng)

    edges = np.array(sorted(geometric) + extra, dtype=np.int64)
    graph = NeighbourhoodGraph(n_nodes, edges)
    logger.info(
        f"torus network n={spec.n}: {n_nodes} nodes, {len(geometric)} geometric "
        f"and {len(extra)} non-geometric edges ({spec.matching.value} matching)"
    )
    return graph


def torus_reference(n: int) -> PointCloud:
    """The ``n * n`` regularly spaced torus points in R^4, node-ordered."""
    if n < 1:
        raise InvalidInput("grid side must be positive")
    x, y = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    x, y = x.ravel(), y.ravel()
    u, v = 2 * np.pi * x / n, 2 * np.pi * y / n
    points = np.column_stack([np.cos(u), np.sin(u), np.cos(v), np.sin(v)]) / (2 * np.pi)
    return PointCloud(points, np.column_stack([x, y]))


def torus_flat_distances(n: int) -> DissimilarityMatrix:
    """Flat-torus distances between grid nodes, one grid step = ``1 / n``."""
    if n < 1:
        raise InvalidInput("grid side must be positive")
    x, y = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    x, y = x.ravel(), y.ravel()
    dx = np.abs(x[:, None] - x[None, :])
    dy = np.abs(y[:, None] - y[None, :])
    dx = np.minimum(dx, n - dx)
    dy = np.minimum(dy, n - dy)
    return DissimilarityMatrix(np.sqrt(dx ** 2 + dy ** 2) / n)


def sphere_sample(n_points: int, rng_seed: int, radius: float = 1.0) -> PointCloud:
    """Uniform sample of the 2-sphere; ``intrinsic_coords`` are (polar, azimuth)."""
    if n_points < 1 or not radius > 0:
        raise InvalidInput("sphere sample needs n_points >= 1 and radius > 0")
    rng = np.random.default_rng(rng_seed)
    direction = rng.normal(size=(n_points, 3))
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    polar = np.arccos(np.clip(direction[:, 2], -1.0, 1.0))
    azimuth = np.arctan2(direction[:, 1], direction[:, 0])
    return PointCloud(radius * direction, np.column_stack([polar, azimuth]))
