"""
Levy concentration of weighted sums of circle variables.

For a unit weight vector a and i.i.d. X_k uniform on the unit circle, the sum
S = sum_k a_k X_k lives in R^2 and its concentration function is

    C_eps(S) = sup_z P(|S - z| <= eps)

This module provides:
- WeightVector with the class predicate is_in_S4
- Replicable samplers and chunked drawing over indexed substreams
- A two-stage grid search for C_eps with an independent holdout evaluation
- Verifiers for the universal bound, the quadratic law, the sharpness
  example, the log singularity of the 3-fold convolution and the
  multidimensional density bound
"""

import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Union

import numpy as np
from scipy import signal
from scipy.spatial import cKDTree

from deloclab import settings
from deloclab.engine.base_executor import TrialExecutorBase
from deloclab.engine.trial_executor import TrialExecutor, chunk_sizes
from deloclab.errors import ConfigError, PreconditionError, ResolutionError, UnsupportedDimensionError
from deloclab.histogram import (MIN_RELIABLE_COUNT, DensityHistogram, GridCounter, annulus_area,
                                annulus_counts, annulus_density, default_bin_width)
from deloclab.settings import Z95
from deloclab.streams import StreamFactory

UNIT_NORM_TOL = 1e-12
MIN_CONCENTRATION_SAMPLES = 1000
MAX_MULTIDIM_DIMENSION = 3

# max rows * N entries per vectorised batch inside a sampler
_BATCH_ENTRIES = 1 << 22


# --- Weights ---

@dataclass(frozen=True, eq=False)
class WeightVector:
    """Real unit vector a in S^{N-1}.

    Raises:
        PreconditionError: If |sum a_k^2 - 1| > 1e-12
    """
    weights: np.ndarray

    def __post_init__(self):
        weights = np.asarray(self.weights, dtype=float).ravel()
        if weights.size == 0 or not np.all(np.isfinite(weights)):
            raise PreconditionError("weights must be a non-empty finite vector")
        norm2 = float(np.sum(weights ** 2))
        if abs(norm2 - 1.0) > UNIT_NORM_TOL:
            raise PreconditionError(f"weights must have unit norm, sum a_k^2 = {norm2:.15g}")
        weights.setflags(write=False)
        object.__setattr__(self, 'weights', weights)

    @property
    def n(self) -> int:
        return int(self.weights.size)

    @property
    def squares(self) -> np.ndarray:
        return self.weights ** 2

    @property
    def l1(self) -> float:
        return float(np.sum(np.abs(self.weights)))

    def permuted(self, order: Sequence[int]) -> "WeightVector":
        return WeightVector(self.weights[np.asarray(order)])

    def negated(self, mask: Sequence[bool]) -> "WeightVector":
        return WeightVector(np.where(np.asarray(mask, dtype=bool), -self.weights, self.weights))

    @classmethod
    def normalized(cls, values: Sequence[float]) -> "WeightVector":
        values = np.asarray(values, dtype=float)
        norm = float(np.linalg.norm(values))
        if norm == 0:
            raise PreconditionError("cannot normalize the zero vector")
        return cls(values / norm)

    @classmethod
    def flat(cls, n: int) -> "WeightVector":
        return cls(np.full(int(n), 1.0 / math.sqrt(n)))

    @classmethod
    def basis(cls, n: int, i: int = 0) -> "WeightVector":
        weights = np.zeros(int(n))
        weights[i] = 1.0
        return cls(weights)

    @classmethod
    def random_unit(cls, n: int, rng: np.random.Generator) -> "WeightVector":
        """Uniform draw on S^{N-1} (normalised Gaussian vector)."""
        return cls.normalized(rng.standard_normal(int(n)))

    @classmethod
    def random_s4(cls, n: int, epsilon0: float, rng: np.random.Generator, max_tries: int = 10_000) -> "WeightVector":
        """Uniform draw on S^{N-1} conditioned on is_in_S4, by rejection.

        Raises:
            PreconditionError: If N < 5 or no draw is accepted within max_tries
        """
        if n < 5:
            raise PreconditionError(f"S4 needs N >= 5, got {n}")
        for _ in range(max_tries):
            candidate = cls.random_unit(n, rng)
            if is_in_S4(candidate, epsilon0):
                return candidate
        raise PreconditionError(f"no S4 vector found for N={n}, epsilon0={epsilon0} in {max_tries} draws")


def as_weights(weights: Union[WeightVector, Sequence[float]]) -> WeightVector:
    return weights if isinstance(weights, WeightVector) else WeightVector(weights)


def is_in_S4(weights: Union[WeightVector, Sequence[float]], epsilon0: float) -> bool:
    """True iff N >= 5 and every 4-coordinate projection has squared norm <= 1 - epsilon0.

    The largest projection onto a coordinate subspace keeps the four largest
    a_k^2, so only their sum is checked.

    Raises:
        PreconditionError: If epsilon0 is outside (0, 1)
    """
    if not 0 < epsilon0 < 1:
        raise PreconditionError(f"epsilon0 must lie in (0, 1), got {epsilon0}")
    squares = np.asarray(weights.weights if isinstance(weights, WeightVector) else weights, dtype=float) ** 2
    if squares.size < 5:
        return False
    return bool(np.sum(np.sort(squares)[-4:]) <= 1.0 - epsilon0)


# --- Samplers ---

class Sampler(ABC):
    """Replicable source of draws in R^d; all randomness comes from the rng argument."""

    @property
    @abstractmethod
    def dimension(self) -> int:
        pass

    @property
    @abstractmethod
    def support_radius(self) -> float:
        """Upper bound on |S| over the support."""
        pass

    @abstractmethod
    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        """Draw `count` points as a (count, d) array."""
        pass


@dataclass(frozen=True, eq=False)
class CircleSumSampler(Sampler):
    """sum_k c_k X_k with X_k i.i.d. uniform on the unit circle, as points of R^2."""
    coefficients: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, 'coefficients', np.asarray(self.coefficients, dtype=float).ravel())

    @property
    def dimension(self) -> int:
        return 2

    @property
    def support_radius(self) -> float:
        return float(np.sum(np.abs(self.coefficients)))

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        n = self.coefficients.size
        rows = max(1, _BATCH_ENTRIES // n)
        out = np.empty((count, 2))
        for start in range(0, count, rows):
            stop = min(start + rows, count)
            angles = 2 * np.pi * rng.random((stop - start, n))
            sums = np.exp(1j * angles) @ self.coefficients
            out[start:stop, 0] = sums.real
            out[start:stop, 1] = sums.imag
        return out

    @classmethod
    def walk(cls, steps: int) -> "CircleSumSampler":
        """X_1 + ... + X_steps, the planar random walk with unit steps."""
        return cls(np.ones(int(steps)))


def weighted_circle_sum_sampler(weights: Union[WeightVector, Sequence[float]]) -> CircleSumSampler:
    """Sampler of sum a_k X_k for unit-norm weights.

    Raises:
        PreconditionError: If the weights are not unit norm
    """
    return CircleSumSampler(as_weights(weights).weights)


@dataclass(frozen=True)
class UniformCubeFamily:
    """X uniform on [-sqrt 3, sqrt 3]^d: mean 0, covariance I_d.

    Certified constants: density bound K = (2 sqrt 3)^-d, covariance entry
    bound L = 1, determinant floor delta = 1 and E|X|^(2+eta) <= (3d)^(1+eta/2).
    """
    d: int = 1
    eta: float = 1.0

    @property
    def density_bound(self) -> float:
        return (2.0 * math.sqrt(3.0)) ** (-self.d)

    @property
    def covariance(self) -> np.ndarray:
        return np.eye(self.d)

    @property
    def covariance_bound(self) -> float:
        return 1.0

    @property
    def determinant_floor(self) -> float:
        return 1.0

    @property
    def moment_bound(self) -> float:
        return (3.0 * self.d) ** (1.0 + self.eta / 2.0)

    @property
    def half_width(self) -> float:
        return math.sqrt(3.0)

    @property
    def radius(self) -> float:
        return math.sqrt(3.0 * self.d)

    def draw(self, rng: np.random.Generator, shape) -> np.ndarray:
        return rng.uniform(-self.half_width, self.half_width, size=tuple(shape) + (self.d,))


@dataclass(frozen=True)
class UnitCircleFamily:
    """X uniform on the unit circle of R^2: mean 0, covariance I_2 / 2, |X| = 1.

    The law has no planar density, so density_bound is infinite.
    """
    eta: float = 1.0
    d: int = 2

    @property
    def density_bound(self) -> float:
        return math.inf

    @property
    def covariance(self) -> np.ndarray:
        return 0.5 * np.eye(2)

    @property
    def covariance_bound(self) -> float:
        return 0.5

    @property
    def determinant_floor(self) -> float:
        return 0.25

    @property
    def moment_bound(self) -> float:
        return 1.0

    @property
    def radius(self) -> float:
        return 1.0

    def draw(self, rng: np.random.Generator, shape) -> np.ndarray:
        angles = 2 * np.pi * rng.random(tuple(shape))
        return np.stack([np.cos(angles), np.sin(angles)], axis=-1)


VariableFamily = Union[UniformCubeFamily, UnitCircleFamily]


def uniform_cube_family(d: int, eta: float = 1.0) -> UniformCubeFamily:
    return UniformCubeFamily(d=int(d), eta=float(eta))


@dataclass(frozen=True, eq=False)
class IIDFamilySampler(Sampler):
    """sum_k a_k X_k with X_k i.i.d. from a d-dimensional family."""
    family: VariableFamily
    coefficients: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, 'coefficients', np.asarray(self.coefficients, dtype=float).ravel())

    @property
    def dimension(self) -> int:
        return self.family.d

    @property
    def support_radius(self) -> float:
        return float(np.sum(np.abs(self.coefficients))) * self.family.radius

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        n = self.coefficients.size
        rows = max(1, _BATCH_ENTRIES // (n * self.family.d))
        out = np.empty((count, self.family.d))
        for start in range(0, count, rows):
            stop = min(start + rows, count)
            out[start:stop] = np.einsum('rnd,n->rd', self.family.draw(rng, (stop - start, n)), self.coefficients)
        return out


# --- Chunked drawing ---

@dataclass
class _ChunkTask:
    sampler: Sampler
    streams: StreamFactory
    sizes: List[int]
    reducer: Optional[Callable[[np.ndarray], object]] = None

    def __call__(self, index: int):
        points = self.sampler.sample(self.streams.substream(index), self.sizes[index])
        return points if self.reducer is None else self.reducer(points)


def _executor(executor: Optional[TrialExecutorBase]) -> TrialExecutorBase:
    return executor if executor is not None else TrialExecutor(workers=1, progress=False)


def map_chunks(sampler: Sampler, samples: int, streams: StreamFactory, executor: TrialExecutorBase = None,
               reducer: Callable[[np.ndarray], object] = None, label: str = "sample chunks",
               chunk: int = None) -> list:
    """Draw `samples` points in fixed chunks; chunk i uses substream i.

    Args:
        sampler: Source of draws
        samples: Total number of draws
        streams: Substream factory
        executor: Executor for the chunks (in-process by default)
        reducer: Optional picklable map applied to each chunk inside the worker
        label: Name used in logs and progress bars
        chunk: Chunk size (default LAB_CHUNK_SIZE)

    Returns:
        Per-chunk results in chunk order
    """
    sizes = chunk_sizes(int(samples), int(chunk or settings.LAB_CHUNK_SIZE))
    task = _ChunkTask(sampler, streams, sizes, reducer)
    return _executor(executor).execute(task, range(len(sizes)), label=label)


def draw_points(sampler: Sampler, samples: int, streams: StreamFactory, executor: TrialExecutorBase = None) -> np.ndarray:
    """Reproducible (samples, d) array of draws."""
    chunks = map_chunks(sampler, samples, streams, executor, label="draws")
    return np.concatenate(chunks) if chunks else np.empty((0, sampler.dimension))


@dataclass
class _RadialCounts:
    """Closed-ball counts of |S| <= eps for every eps of a grid."""
    epsilons: np.ndarray

    def __call__(self, points: np.ndarray) -> np.ndarray:
        radii = np.sort(np.hypot(points[:, 0], points[:, 1]))
        return np.searchsorted(radii, self.epsilons, side='right').astype(np.int64)


@dataclass
class _AnnulusCounts:
    """Per-sector counts of draws on a set of thin annuli."""
    radii: np.ndarray
    half_widths: np.ndarray
    sectors: int

    def __call__(self, points: np.ndarray) -> np.ndarray:
        norms = np.hypot(points[:, 0], points[:, 1])
        angles = np.arctan2(points[:, 1], points[:, 0])
        return np.stack([annulus_counts(norms, r, h, angles, self.sectors)
                         for r, h in zip(self.radii, self.half_widths)])


# --- Concentration function ---

@dataclass
class ConcentrationEstimate:
    """Estimate of C_eps(S) at the shift found by the grid search.

    Attributes:
        epsilon (float): Ball radius
        value (float): Fraction of holdout draws in the closed ball around argmax_shift
        argmax_shift (np.ndarray): Selected centre z
        ci_radius (float): 95% binomial half-width
        samples (int): Total draws, search and holdout halves together
        std_error (float): Binomial standard error of value
        search_value (float): Fraction of search draws in the ball, biased upward by the search
    """
    epsilon: float
    value: float
    argmax_shift: np.ndarray
    ci_radius: float
    samples: int
    std_error: float = 0.0
    search_value: float = 0.0


def _coarse_candidates(points: np.ndarray, epsilon: float, radius: float, candidates: int, max_cells: int) -> np.ndarray:
    spacing = epsilon / 2.0
    m = int(math.ceil(radius / spacing))
    if (2 * m + 1) ** 2 > max_cells:
        raise ConfigError(f"coarse grid needs {(2 * m + 1) ** 2} cells (limit {max_cells}); raise epsilon", "epsilon")
    # cell centres sit at spacing * i for i = -m..m, so z = 0 is always a candidate
    edges = spacing * (np.arange(-m, m + 2) - 0.5)
    counts, _, _ = np.histogram2d(points[:, 0], points[:, 1], bins=[edges, edges])
    offsets = np.arange(-2, 3)
    kernel = ((offsets[:, None] ** 2 + offsets[None, :] ** 2) <= 4).astype(float)
    smoothed = np.rint(signal.fftconvolve(counts, kernel, mode='same')).ravel()
    k = min(int(candidates), smoothed.size)
    top = np.argpartition(smoothed, -k)[-k:]
    top = top[np.lexsort((top, -smoothed[top]))]
    rows, cols = np.unravel_index(top, (2 * m + 1, 2 * m + 1))
    return np.column_stack([spacing * (rows - m), spacing * (cols - m)])


def _refine(tree: cKDTree, centres: np.ndarray, epsilon: float, refine: int):
    spacing = epsilon / 2.0
    offsets = np.linspace(-spacing, spacing, refine + 1)
    grid = np.stack(np.meshgrid(offsets, offsets, indexing='ij'), axis=-1).reshape(-1, 2)
    shifts = (centres[:, None, :] + grid[None, :, :]).reshape(-1, 2)
    counts = tree.query_ball_point(shifts, r=epsilon, return_length=True)
    best = int(np.argmax(counts))
    return shifts[best], int(counts[best])


def concentration_from_points(points: np.ndarray, epsilon: float, support_radius: float = math.inf,
                              refine: int = 10, candidates: int = 8, max_cells: int = 4_000_000) -> ConcentrationEstimate:
    """C_eps from a fixed array of planar draws.

    The first half of the draws drives the search: a coarse grid at spacing
    eps/2 over the disk of radius min(support, max |S|) + eps, smoothed with a
    disk kernel, then a grid at spacing eps/refine around the best coarse cells
    counted exactly. The chosen centre is re-evaluated on the second half with
    the closed ball |S - z| <= eps.

    Raises:
        PreconditionError: If epsilon <= 0 or fewer than 1000 draws are given
        ConfigError: If refine or candidates < 1, or the coarse grid exceeds max_cells
    """
    if not epsilon > 0:
        raise PreconditionError(f"epsilon must be positive, got {epsilon}")
    points = np.asarray(points, dtype=float)
    if points.ndim != 2 or points.shape[1] != 2:
        raise PreconditionError(f"concentration search needs planar draws, got shape {points.shape}")
    if len(points) < MIN_CONCENTRATION_SAMPLES:
        raise PreconditionError(f"need at least {MIN_CONCENTRATION_SAMPLES} draws, got {len(points)}")
    if refine < 1 or candidates < 1:
        raise ConfigError(f"refine and candidates must be >= 1, got refine={refine}, candidates={candidates}", "refine")

    half = len(points) // 2
    search, holdout = points[:half], points[half:]
    radius = min(support_radius, float(np.max(np.hypot(search[:, 0], search[:, 1])))) + epsilon
    centres = _coarse_candidates(search, epsilon, radius, candidates, max_cells)
    shift, search_hits = _refine(cKDTree(search), centres, epsilon, int(refine))

    hits = int(np.count_nonzero(np.sum((holdout - shift) ** 2, axis=1) <= epsilon ** 2))
    value = hits / len(holdout)
    std_error = math.sqrt(value * (1.0 - value) / len(holdout))
    return ConcentrationEstimate(
        epsilon=float(epsilon),
        value=value,
        argmax_shift=shift,
        ci_radius=Z95 * std_error,
        samples=len(points),
        std_error=std_error,
        search_value=search_hits / len(search),
    )


def levy_concentration(sampler: Sampler, epsilon: float, samples: int = 1_000_000, streams: StreamFactory = None,
                       executor: TrialExecutorBase = None, refine: int = 10, candidates: int = 8) -> ConcentrationEstimate:
    """Estimate C_eps(S) = sup_z P(|S - z| <= eps) for a planar sampler.

    Args:
        sampler: Planar sampler
        epsilon: Ball radius, positive
        samples: Number of draws, at least 1000 (half search, half holdout)
        streams: Substream factory
        executor: Executor for drawing chunks
        refine: Refinement factor; the fine grid spacing is eps / refine
        candidates: Number of coarse cells refined

    Raises:
        PreconditionError: If epsilon <= 0 or samples < 1000
        ConfigError: If the search grid is degenerate
    """
    if not epsilon > 0:
        raise PreconditionError(f"epsilon must be positive, got {epsilon}")
    if samples < MIN_CONCENTRATION_SAMPLES:
        raise PreconditionError(f"need at least {MIN_CONCENTRATION_SAMPLES} samples, got {samples}")
    points = draw_points(sampler, samples, streams or StreamFactory(0, "concentration"), executor)
    return concentration_from_points(points, epsilon, sampler.support_radius, refine, candidates)


def circle_concentration(epsilon: float) -> float:
    """Exact C_eps of one circle variable: arcsin(eps)/pi, attained at |z| = sqrt(1 - eps^2); 1 for eps >= 1."""
    if not epsilon > 0:
        raise PreconditionError(f"epsilon must be positive, got {epsilon}")
    return 1.0 if epsilon >= 1 else math.asin(epsilon) / math.pi


def twofold_small_ball(epsilon: float) -> float:
    """P(|X_1 + X_2| / sqrt 2 <= eps) = (2/pi) arcsin(eps / sqrt 2), and 1 beyond the support."""
    if not epsilon > 0:
        raise PreconditionError(f"epsilon must be positive, got {epsilon}")
    return 1.0 if epsilon >= math.sqrt(2.0) else 2.0 / math.pi * math.asin(epsilon / math.sqrt(2.0))


# --- Verifiers ---

@dataclass
class ConcentrationRatio:
    """C_eps(S) / C_eps(X) at one eps, both estimated from the same substreams."""
    epsilon: float
    ratio: float
    sum_estimate: ConcentrationEstimate
    reference_estimate: ConcentrationEstimate


def verify_bn_bound(weights: Union[WeightVector, Sequence[float]], eps_grid: Sequence[float], samples: int = 1_000_000,
                    streams: StreamFactory = None, executor: TrialExecutorBase = None) -> List[ConcentrationRatio]:
    """Ratio of C_eps of the weighted sum to C_eps of a single circle variable, per eps.

    Both estimates at a given eps draw from the same child substreams, so
    weights = (1) gives a ratio of exactly 1.

    Raises:
        PreconditionError: If the weights are not unit norm or the grid is empty
        ResolutionError: If the reference ball at some eps holds no draw
    """
    sampler = weighted_circle_sum_sampler(weights)
    reference = CircleSumSampler(np.ones(1))
    eps_grid = [float(e) for e in eps_grid]
    if not eps_grid:
        raise PreconditionError("epsilon grid is empty")
    streams = streams or StreamFactory(0, "bn-bound")
    ratios = []
    for eps in eps_grid:
        child = streams.child(f"eps={eps!r}")
        estimate = levy_concentration(sampler, eps, samples, child, executor)
        baseline = levy_concentration(reference, eps, samples, child, executor)
        if baseline.value <= 0:
            raise ResolutionError(f"no reference draw within eps={eps} of any centre from {samples} samples")
        ratio = estimate.value / baseline.value
        logging.info(f"Concentration ratio at eps={eps}: {ratio:.6g}")
        ratios.append(ConcentrationRatio(float(eps), ratio, estimate, baseline))
    return ratios


@dataclass
class QuadraticFit:
    """Empirical B with C_eps(S) <= B eps^2.

    Attributes:
        constant (float): Largest C_eps / eps^2 over the grid
        ci_radius (float): 95% half-width of that ratio
        epsilon (float): Grid point of the largest ratio
        ratios (List[float]): C_eps / eps^2 per grid point
        estimates (List[ConcentrationEstimate]): Underlying estimates
    """
    constant: float
    ci_radius: float
    epsilon: float
    ratios: List[float] = field(default_factory=list)
    estimates: List[ConcentrationEstimate] = field(default_factory=list)


def verify_quadratic_bound(weights: Union[WeightVector, Sequence[float]], epsilon0: float, eps_grid: Sequence[float],
                           samples: int = 1_000_000, streams: StreamFactory = None,
                           executor: TrialExecutorBase = None) -> QuadraticFit:
    """Max over the grid of C_eps(S) / eps^2 for weights in S4(epsilon0).

    One set of draws serves every grid point.

    Raises:
        PreconditionError: If the weights are not in S4(epsilon0) or a grid point is outside (0, 0.3]
        ResolutionError: If the ball at some grid point holds no draw
    """
    weights = as_weights(weights)
    if not is_in_S4(weights, epsilon0):
        raise PreconditionError(f"weights (N={weights.n}) are not in S4 with epsilon0={epsilon0}")
    eps_grid = [float(e) for e in eps_grid]
    if not eps_grid or any(not 0 < e <= 0.3 for e in eps_grid):
        raise PreconditionError(f"epsilon grid must be non-empty within (0, 0.3], got {eps_grid}")
    sampler = weighted_circle_sum_sampler(weights)
    points = draw_points(sampler, samples, streams or StreamFactory(0, "quadratic"), executor)

    estimates = [concentration_from_points(points, eps, sampler.support_radius) for eps in eps_grid]
    empty = [e.epsilon for e in estimates if e.value <= 0]
    if empty:
        raise ResolutionError(f"no draw within eps={empty} of any centre from {samples} samples; raise the sample count")
    ratios = [e.value / e.epsilon ** 2 for e in estimates]
    best = int(np.argmax(ratios))
    logging.info(f"Quadratic constant for N={weights.n}: {ratios[best]:.6g} at eps={eps_grid[best]}")
    return QuadraticFit(
        constant=ratios[best],
        ci_radius=estimates[best].ci_radius / eps_grid[best] ** 2,
        epsilon=eps_grid[best],
        ratios=ratios,
        estimates=estimates,
    )


@dataclass
class SmallBallPoint:
    epsilon: float
    probability: float
    ci_radius: float

    @property
    def linear_ratio(self) -> float:
        return self.probability / self.epsilon

    @property
    def quadratic_ratio(self) -> float:
        return self.probability / self.epsilon ** 2


@dataclass
class SharpnessReport:
    """Small-ball law of S = (X_1 + X_2 + X_3 + X_4) / 2 around the origin.

    Attributes:
        points (List[SmallBallPoint]): P(|S| <= eps) per grid point, in grid order
        min_linear_ratio (float): min over the grid of P / eps
        quadratic_growth (float): P/eps^2 at the smallest eps divided by its value at the largest eps
    """
    points: List[SmallBallPoint]
    min_linear_ratio: float
    quadratic_growth: float


def sharpness_check(eps_grid: Sequence[float], samples: int = 10_000_000, streams: StreamFactory = None,
                    executor: TrialExecutorBase = None) -> SharpnessReport:
    """P(|S| <= eps) for S = (X_1 + ... + X_4) / 2, a unit vector outside every S4 class.

    Raises:
        PreconditionError: If the grid is empty or holds a non-positive eps
        ResolutionError: If the ball at some eps holds no draw
    """
    eps_grid = [float(e) for e in eps_grid]
    if not eps_grid or min(eps_grid) <= 0:
        raise PreconditionError(f"epsilon grid must be non-empty and positive, got {eps_grid}")
    sampler = weighted_circle_sum_sampler(np.full(4, 0.5))
    counts = map_chunks(sampler, samples, streams or StreamFactory(0, "sharpness"), executor,
                        reducer=_RadialCounts(np.asarray(eps_grid)), label="sharpness chunks")
    totals = np.sum(np.stack(counts), axis=0)
    if np.any(totals == 0):
        empty = [eps for eps, hits in zip(eps_grid, totals) if hits == 0]
        raise ResolutionError(f"no draw of |S| <= eps for eps={empty} from {samples} samples; raise the sample count")

    points = []
    for eps, hits in zip(eps_grid, totals):
        p = int(hits) / samples
        points.append(SmallBallPoint(eps, p, Z95 * math.sqrt(p * (1 - p) / samples)))
    smallest = min(points, key=lambda pt: pt.epsilon)
    largest = max(points, key=lambda pt: pt.epsilon)
    return SharpnessReport(points=points, min_linear_ratio=min(pt.linear_ratio for pt in points),
                           quadratic_growth=smallest.quadratic_ratio / largest.quadratic_ratio)


@dataclass
class AnnulusRatio:
    """Density of X_1 + X_2 + X_3 on a thin annulus, against |ln|1 - r||.

    Attributes:
        radius (float): Annulus centre radius
        half_width (float): Half the annulus thickness
        density (float): Estimated density over the whole annulus
        std_error (float): Standard error of the density
        ratio (float): density / |ln|1 - r||
        sector_densities (np.ndarray): Densities on equal angular sectors
        sector_errors (np.ndarray): Their standard errors
    """
    radius: float
    half_width: float
    density: float
    std_error: float
    ratio: float
    sector_densities: np.ndarray
    sector_errors: np.ndarray


def _default_half_width(radius: float) -> float:
    return min(0.002, abs(1.0 - radius) / 4.0)


def threefold_log_singularity(radius_grid: Sequence[float], samples: int = 10_000_000, streams: StreamFactory = None,
                              executor: TrialExecutorBase = None, half_width: float = None,
                              sectors: int = 4) -> List[AnnulusRatio]:
    """Annulus densities of X_1 + X_2 + X_3 near the unit circle, divided by |ln|1 - r||.

    A ring is too thin when samples * area / (9 pi), the count a uniform law on
    the support disk of radius 3 would put there, falls below 100.

    Raises:
        PreconditionError: If a radius is outside (0, 3) or equals 1
        ResolutionError: If an annulus is too thin for the sample count
    """
    radii = [float(r) for r in radius_grid]
    if not radii or any(not 0 < r < 3 or r == 1.0 for r in radii):
        raise PreconditionError(f"radii must lie in (0, 1) or (1, 3), got {radii}")
    widths = [half_width if half_width is not None else _default_half_width(r) for r in radii]
    for r, h in zip(radii, widths):
        expected = samples * annulus_area(r, h) / (9.0 * math.pi)
        if expected < MIN_RELIABLE_COUNT:
            raise ResolutionError(f"annulus at r={r} (half width {h:g}) expects {expected:.1f} draws; need {MIN_RELIABLE_COUNT}")

    reducer = _AnnulusCounts(np.asarray(radii), np.asarray(widths), int(sectors))
    counts = map_chunks(CircleSumSampler.walk(3), samples, streams or StreamFactory(0, "threefold"), executor,
                        reducer=reducer, label="threefold chunks")
    totals = np.sum(np.stack(counts), axis=0)

    results = []
    for r, h, sector_counts in zip(radii, widths, totals):
        density, error = annulus_density(np.array([sector_counts.sum()]), r, h, samples)
        sector_density, sector_error = annulus_density(sector_counts, r, h, samples, sectors)
        results.append(AnnulusRatio(
            radius=r,
            half_width=h,
            density=float(density[0]),
            std_error=float(error[0]),
            ratio=float(density[0]) / abs(math.log(abs(1.0 - r))),
            sector_densities=sector_density,
            sector_errors=sector_error,
        ))
    return results


@dataclass
class MultidimReport:
    """Histogram maximum density of a weighted sum next to the per-variable bound K."""
    max_density: float
    std_error: float
    density_bound: float
    bin_width: float
    histogram: DensityHistogram

    @property
    def ratio(self) -> float:
        return self.max_density / self.density_bound


def sampler_histogram(sampler: Sampler, samples: int, streams: StreamFactory = None,
                      executor: TrialExecutorBase = None) -> DensityHistogram:
    """Histogram of a sampler's law on a grid fixed by a pilot chunk.

    The pilot is chunk 0 itself: its spread, widened by a quarter on each
    side, fixes the grid, and the bin width is diameter * samples^(-1/(d+2)).
    Draws outside the grid still count in the total.
    """
    streams = streams or StreamFactory(0, "histogram")
    d = sampler.dimension
    pilot = sampler.sample(streams.substream(0), min(int(samples), settings.LAB_CHUNK_SIZE))
    lower, upper = pilot.min(axis=0), pilot.max(axis=0)
    # pilot width rescaled from len(pilot) to the full sample count
    width = default_bin_width(pilot) * (len(pilot) / samples) ** (1.0 / (d + 2))
    margin = 0.25 * (upper - lower)
    origin = np.floor((lower - margin) / width) * width
    shape = tuple(int(s) for s in np.ceil((upper + margin - origin) / width))
    counter = GridCounter(origin, np.full(d, width), shape)
    chunk_counts = map_chunks(sampler, samples, streams, executor, reducer=counter, label="histogram chunks")
    return counter.collect(chunk_counts, int(samples))


def verify_multidim_bound(family: VariableFamily, weights: Union[WeightVector, Sequence[float]],
                          samples: int = 10_000_000, streams: StreamFactory = None,
                          executor: TrialExecutorBase = None) -> MultidimReport:
    """Max histogram density of sum a_k X_k for X_k from a certified family.

    Raises:
        UnsupportedDimensionError: If d > 3
        PreconditionError: If the weights are not unit norm
        ResolutionError: If no bin holds 100 draws
    """
    if family.d > MAX_MULTIDIM_DIMENSION or family.d < 1:
        raise UnsupportedDimensionError(f"density histograms are limited to d <= {MAX_MULTIDIM_DIMENSION}, got d={family.d}")
    weights = as_weights(weights)
    hist = sampler_histogram(IIDFamilySampler(family, weights.weights), samples, streams or StreamFactory(0, "multidim"), executor)
    value, error, _ = hist.max_density()
    return MultidimReport(max_density=value, std_error=error, density_bound=family.density_bound,
                          bin_width=float(hist.widths[0]), histogram=hist)


def walk_max_density(steps: int, samples: int = 10_000_000, streams: StreamFactory = None,
                     executor: TrialExecutorBase = None) -> MultidimReport:
    """Max histogram density of X_1 + ... + X_steps, to set against the five-term bound phi."""
    hist = sampler_histogram(CircleSumSampler.walk(steps), samples, streams or StreamFactory(0, "walk"), executor)
    value, error, _ = hist.max_density()
    return MultidimReport(max_density=value, std_error=error, density_bound=math.inf,
                          bin_width=float(hist.widths[0]), histogram=hist)
