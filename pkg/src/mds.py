"""Classical multidimensional scaling and residual-variance profiles."""

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
from loguru import logger
from scipy import linalg
from scipy.spatial.distance import pdist
from scipy.stats import pearsonr

from .errors import ConstantInput, EigenFailure, InvalidInput
from .schemas import DissimilarityMatrix, upper_triangle

# Eigenvalues below N * EIGEN_RTOL * max(eigenvalue) count as zero
EIGEN_RTOL = 1e-12


@dataclass(frozen=True, eq=False)
class Embedding:
    """Points in R^p produced by classical MDS.

    Attributes:
        coordinates: (N, p) matrix, columns in descending eigenvalue order
        eigenvalues: the p eigenvalues used, clamped at zero
    """
    coordinates: np.ndarray
    eigenvalues: np.ndarray

    def __post_init__(self):
        if self.coordinates.ndim != 2 or self.coordinates.shape[1] < 1:
            raise InvalidInput("an embedding needs at least one coordinate")
        if self.eigenvalues.shape[0] != self.coordinates.shape[1]:
            raise InvalidInput("one eigenvalue per coordinate is required")

    @property
    def n_points(self) -> int:
        return self.coordinates.shape[0]

    @property
    def p(self) -> int:
        return self.coordinates.shape[1]

    def pairwise_distances(self) -> np.ndarray:
        """Euclidean distances in upper-triangle pair order."""
        return pdist(self.coordinates)


@dataclass
class ResidualProfile:
    """Residual variances R_p and the approximate embedding dimension P.

    ``residuals`` holds R_p for every p that was evaluated; at least
    ``1..p_max`` and, when P lies beyond ``p_max``, every p up to P (or the cap).
    """
    residuals: Dict[int, float]
    p_max: int
    dimension: int
    criterion: float = 0.05
    cap: int = 100
    eigenvalues: np.ndarray = field(default_factory=lambda: np.zeros(0), repr=False)

    @property
    def capped(self) -> bool:
        return self.dimension == self.cap and self.residuals.get(self.cap, 1.0) >= self.criterion

    def plotted(self) -> List[Tuple[int, float]]:
        return [(p, self.residuals[p]) for p in range(1, self.p_max + 1) if p in self.residuals]


def double_center(d: DissimilarityMatrix) -> np.ndarray:
    """Return ``-H S H / 2`` with ``S = D**2`` and ``H = I - 11^T / N``."""
    if not d.is_symmetric:
        raise InvalidInput("double centering needs a symmetric matrix")
    s = d.d ** 2
    row = s.mean(axis=1, keepdims=True)
    col = s.mean(axis=0, keepdims=True)
    tau = -0.5 * (s - row - col + s.mean())
    return (tau + tau.T) / 2.0


def _spectrum(d: DissimilarityMatrix) -> Tuple[np.ndarray, np.ndarray]:
    """Eigenpairs of the double-centred matrix, descending, near-zero and
    negative eigenvalues set to zero."""
    tau = double_center(d)
    try:
        values, vectors = linalg.eigh(tau)
    except linalg.LinAlgError as e:
        raise EigenFailure(f"symmetric eigensolver failed: {e}") from e

    order = np.argsort(values, kind="stable")[::-1]
    values = values[order]
    vectors = vectors[:, order]
    top = values[0] if values.size else 0.0
    tolerance = d.n * EIGEN_RTOL * top if top > 0 else 0.0
    values = np.where(values > tolerance, values, 0.0)
    negative = int(np.count_nonzero(values <= 0))
    logger.debug(f"MDS spectrum: {d.n - negative} positive eigenvalues of {d.n}")
    return values, vectors


def _embed(values: np.ndarray, vectors: np.ndarray, p: int) -> Embedding:
    coordinates = vectors[:, :p] * np.sqrt(values[:p])
    return Embedding(coordinates, values[:p].copy())


def classical_mds(d: DissimilarityMatrix, p: int) -> Embedding:
    """Embed ``d`` in R^p by classical MDS.

    Args:
        d: Symmetric dissimilarity matrix
        p: Target dimension, ``1 <= p <= N``

    Returns:
        Embedding whose columns are eigenvectors of the double-centred matrix
        scaled by the square root of their eigenvalues

    Raises:
        EigenFailure: If the eigensolver does not converge
    """
    if not 1 <= p <= d.n:
        raise InvalidInput(f"embedding dimension must satisfy 1 <= p <= N={d.n}, got {p}")
    values, vectors = _spectrum(d)
    return _embed(values, vectors, p)


def _correlation(reference: np.ndarray, embedded: np.ndarray) -> float:
    if reference.size < 2 or np.ptp(reference) == 0:
        raise ConstantInput("dissimilarities are constant; correlation is undefined")
    if np.ptp(embedded) == 0:
        raise ConstantInput("embedded distances are constant; correlation is undefined")
    r, _ = pearsonr(reference, embedded)
    return float(r)


def residual_variance(d: DissimilarityMatrix, emb: Embedding) -> float:
    """``1 - rho^2`` between the entries of ``d`` and the embedded distances."""
    if emb.n_points != d.n:
        raise InvalidInput(f"embedding has {emb.n_points} points, matrix has {d.n}")
    r = _correlation(upper_triangle(d), emb.pairwise_distances())
    return float(np.clip(1.0 - r * r, 0.0, 1.0))


def residual_profile(
    d: DissimilarityMatrix,
    p_max: int = 10,
    criterion: float = 0.05,
    cap: int = 100,
) -> ResidualProfile:
    """Residual variances for ``p = 1..p_max`` plus the approximate embedding
    dimension ``P = min{p : R_p < criterion}`` (``cap`` if never reached).

    One eigendecomposition is shared by every p; squared embedded distances
    grow by one coordinate per step.
    """
    if not 0 < criterion < 1:
        raise InvalidInput(f"criterion must lie in (0, 1), got {criterion}")
    if p_max < 1 or cap < 1:
        raise InvalidInput("p_max and cap must be positive")

    reference = upper_triangle(d)
    if reference.size < 2 or np.ptp(reference) == 0:
        raise ConstantInput("dissimilarities are constant; residual variance is undefined")

    values, vectors = _spectrum(d)
    rows, cols = np.triu_indices(d.n, k=1)
    squared = np.zeros(reference.shape[0])
    residuals: Dict[int, float] = {}
    dimension: Optional[int] = None
    last = min(max(p_max, cap), d.n)

    for p in range(1, last + 1):
        column = vectors[:, p - 1] * np.sqrt(values[p - 1])
        squared += (column[rows] - column[cols]) ** 2
        embedded = np.sqrt(squared)
        if np.ptp(embedded) == 0:
            residual = 1.0
        else:
            r, _ = pearsonr(reference, embedded)
            residual = float(np.clip(1.0 - r * r, 0.0, 1.0))
        residuals[p] = residual
        if dimension is None and residual < criterion and p <= cap:
            dimension = p
        if p >= p_max and (dimension is not None or p >= cap):
            break

    if dimension is None:
        dimension = cap
        logger.info(f"residual variance stays above {criterion} up to p={min(cap, d.n)}; P capped at {cap}")

    return ResidualProfile(
        residuals=residuals,
        p_max=min(p_max, d.n),
        dimension=dimension,
        criterion=criterion,
        cap=cap,
        eigenvalues=values[: min(max(p_max, dimension), d.n)].copy(),
    )


def approximate_embedding_dimension(
    d: DissimilarityMatrix,
    criterion: float = 0.05,
    cap: int = 100,
) -> int:
    """Smallest p with ``R_p < criterion``, or ``cap``."""
    return residual_profile(d, p_max=1, criterion=criterion, cap=cap).dimension
