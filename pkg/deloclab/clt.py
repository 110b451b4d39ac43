"""
Numerical checks of the local central limit theorem for triangular arrays.

Row n of an array is X_{n,m} = a_m Y_m, m = 1..n, with Y_m i.i.d. from a
centred family (unit circle or uniform cube) and a unit weight vector a.
The row sum S_n has covariance sum_m a_m^2 Cov(Y), and the local CLT says its
density approaches the Gaussian density g_C in sup norm.
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np

from deloclab.delocalisation import (CircleSumSampler, IIDFamilySampler, Sampler,
                                     UnitCircleFamily, VariableFamily, WeightVector, as_weights,
                                     draw_points, map_chunks, uniform_cube_family)
from deloclab.engine.base_executor import TrialExecutorBase
from deloclab.errors import DomainError, PreconditionError, ResolutionError, UnsupportedDimensionError
from deloclab.histogram import MIN_RELIABLE_COUNT, DensityHistogram, GridCounter, window_histogram
from deloclab.settings import Z95
from deloclab.streams import StreamFactory

SYMMETRY_TOL = 1e-12
WINDOW_SIGMAS = 4.0


@dataclass(frozen=True, eq=False)
class TriangularArraySpec:
    """One row X_{n,1..n} = a_m Y_m of a triangular array.

    Attributes:
        weights (np.ndarray): Row weights a_1..a_n
        family (VariableFamily): Law of the Y_m, with analytic covariance and certified moments
    """
    weights: np.ndarray
    family: VariableFamily

    def __post_init__(self):
        weights = np.asarray(self.weights, dtype=float).ravel()
        if weights.size == 0:
            raise PreconditionError("a triangular array row needs at least one element")
        object.__setattr__(self, 'weights', weights)
        base = self.family.covariance
        if not np.allclose(base, base.T, atol=SYMMETRY_TOL) or np.min(np.linalg.eigvalsh(base)) < -SYMMETRY_TOL:
            raise PreconditionError("element covariances must be symmetric positive semidefinite")

    @property
    def n(self) -> int:
        return int(self.weights.size)

    @property
    def dimension(self) -> int:
        return self.family.d

    @property
    def covariances(self) -> np.ndarray:
        """C_{n,m} = a_m^2 Cov(Y), shape (n, d, d)."""
        return self.weights[:, None, None] ** 2 * self.family.covariance[None]

    @property
    def variances(self) -> np.ndarray:
        """sigma^2_{n,m}, the traces of the C_{n,m}."""
        return np.trace(self.covariances, axis1=1, axis2=2)

    @property
    def eta(self) -> float:
        return self.family.eta

    @property
    def moment_bound(self) -> float:
        return self.family.moment_bound

    @property
    def max_weight(self) -> float:
        """gamma_n = max_m |a_m|."""
        return float(np.max(np.abs(self.weights)))

    @property
    def sampler(self) -> Sampler:
        """Sampler of the row sum S_n."""
        if isinstance(self.family, UnitCircleFamily):
            return CircleSumSampler(self.weights)
        return IIDFamilySampler(self.family, self.weights)

    @property
    def element_sampler(self) -> Sampler:
        """Sampler of a single unweighted Y."""
        return IIDFamilySampler(self.family, np.ones(1))


def circle_array(weights: Union[WeightVector, Sequence[float]]) -> TriangularArraySpec:
    """Row a_m X_m with X_m uniform on the unit circle (E|X|^3 = 1, so M = 1 for eta = 1)."""
    return TriangularArraySpec(as_weights(weights).weights, UnitCircleFamily())


def uniform_array(weights: Union[WeightVector, Sequence[float]], d: int = 1, eta: float = 1.0) -> TriangularArraySpec:
    """Row a_m Y_m with Y_m uniform on [-sqrt 3, sqrt 3]^d (identity covariance)."""
    return TriangularArraySpec(as_weights(weights).weights, uniform_cube_family(d, eta))


@dataclass(frozen=True, eq=False)
class GaussianTarget:
    """Centred Gaussian N(0, C) with a positive-definite covariance.

    Raises:
        DomainError: If C is not square, not symmetric or has det C <= 0
    """
    covariance: np.ndarray

    def __post_init__(self):
        c = np.atleast_2d(np.asarray(self.covariance, dtype=float))
        if c.ndim != 2 or c.shape[0] != c.shape[1]:
            raise DomainError(f"covariance must be a square matrix, got shape {c.shape}")
        if not np.allclose(c, c.T, atol=SYMMETRY_TOL):
            raise DomainError("covariance must be symmetric")
        if np.min(np.linalg.eigvalsh(c)) <= 0:
            raise DomainError("covariance must be positive definite (det C > 0)")
        object.__setattr__(self, 'covariance', c)

    @property
    def dimension(self) -> int:
        return self.covariance.shape[0]

    @property
    def determinant(self) -> float:
        return float(np.linalg.det(self.covariance))

    @property
    def entry_bound(self) -> float:
        """L, the largest covariance entry in absolute value."""
        return float(np.max(np.abs(self.covariance)))

    @property
    def std(self) -> np.ndarray:
        return np.sqrt(np.diag(self.covariance))

    @property
    def peak(self) -> float:
        return float(gaussian_density(self, np.zeros(self.dimension)))


# --- Hypotheses ---

def covariance_sum(spec: TriangularArraySpec) -> np.ndarray:
    """sum_m C_{n,m}, the covariance of the row sum (analytic)."""
    return np.sum(spec.covariances, axis=0)


@dataclass
class _MomentSums:
    """Per-chunk sums of x x^T and (x_i x_j)^2."""

    def __call__(self, points: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        products = points[:, :, None] * points[:, None, :]
        return products.sum(axis=0), (products ** 2).sum(axis=0)


def mc_covariance(spec: TriangularArraySpec, samples: int, streams: StreamFactory = None,
                  executor: TrialExecutorBase = None) -> Tuple[np.ndarray, np.ndarray]:
    """Monte Carlo covariance of the row sum, using the known zero mean.

    Returns:
        Tuple of (covariance estimate, standard error of each entry)
    """
    chunks = map_chunks(spec.sampler, samples, streams or StreamFactory(0, "covariance"), executor,
                        reducer=_MomentSums(), label="covariance chunks")
    first = np.sum(np.stack([c[0] for c in chunks]), axis=0) / samples
    second = np.sum(np.stack([c[1] for c in chunks]), axis=0) / samples
    return first, np.sqrt(np.maximum(second - first ** 2, 0.0) / samples)


def lindeberg_directions(d: int) -> np.ndarray:
    """Unit test directions: 8 at 45 degree spacing for d = 2, +1 and -1 for d = 1.

    Raises:
        UnsupportedDimensionError: If d is not 1 or 2
    """
    if d == 1:
        return np.array([[1.0], [-1.0]])
    if d == 2:
        angles = np.arange(8) * np.pi / 4
        return np.column_stack([np.cos(angles), np.sin(angles)])
    raise UnsupportedDimensionError(f"Lindeberg directions are defined for d in (1, 2), got {d}")


@dataclass
class LindebergEstimate:
    """Monte Carlo Lindeberg sum with its 95% half-width."""
    value: float
    std_error: float
    ci_radius: float


def lindeberg_estimate(spec: TriangularArraySpec, epsilon: float, theta: Sequence[float], samples: int = 1_000_000,
                       streams: StreamFactory = None, executor: TrialExecutorBase = None) -> LindebergEstimate:
    """sum_m E[<theta, X_{n,m}>^2 1{|<theta, X_{n,m}>| > eps}] by Monte Carlo.

    All elements share the law of Y, so one draw t = |<theta, Y>| serves every
    m: it contributes t^2 times the sum of a_m^2 over the m with eps / |a_m| < t.

    Raises:
        PreconditionError: If eps <= 0 or theta has the wrong dimension
    """
    if not epsilon > 0:
        raise PreconditionError(f"epsilon must be positive, got {epsilon}")
    theta = np.asarray(theta, dtype=float).ravel()
    if theta.size != spec.dimension:
        raise PreconditionError(f"theta must have {spec.dimension} entries, got {theta.size}")

    active = spec.weights[spec.weights != 0]
    thresholds = epsilon / np.abs(active)
    order = np.argsort(thresholds, kind='stable')
    thresholds = thresholds[order]
    mass = np.concatenate([[0.0], np.cumsum(active[order] ** 2)])

    draws = draw_points(spec.element_sampler, samples, streams or StreamFactory(0, "lindeberg"), executor)
    magnitudes = np.abs(draws @ theta)
    contributions = magnitudes ** 2 * mass[np.searchsorted(thresholds, magnitudes, side='left')]
    value = float(np.mean(contributions))
    std_error = float(np.std(contributions, ddof=1) / np.sqrt(samples)) if samples > 1 else 0.0
    return LindebergEstimate(value=value, std_error=std_error, ci_radius=Z95 * std_error)


def lindeberg_sum(spec: TriangularArraySpec, epsilon: float, theta: Sequence[float], samples: int = 1_000_000,
                  streams: StreamFactory = None, executor: TrialExecutorBase = None) -> float:
    """Point value of lindeberg_estimate."""
    return lindeberg_estimate(spec, epsilon, theta, samples, streams, executor).value


def lindeberg_bound(moment_bound: float, eta: float, theta_norm: float, epsilon: float, gamma: float) -> float:
    """M |theta|^(2+eta) gamma^eta / eps^eta, the moment bound on the Lindeberg sum."""
    if not epsilon > 0:
        raise PreconditionError(f"epsilon must be positive, got {epsilon}")
    return moment_bound * theta_norm ** (2.0 + eta) * gamma ** eta / epsilon ** eta


# --- Conclusion ---

def gaussian_density(target: Union[GaussianTarget, np.ndarray], x: Union[Sequence[float], np.ndarray]) -> Union[float, np.ndarray]:
    """(2 pi)^(-d/2) (det C)^(-1/2) exp(-x^T C^-1 x / 2), at one point or an (..., d) array.

    Raises:
        DomainError: If C is singular or not positive definite
    """
    if not isinstance(target, GaussianTarget):
        target = GaussianTarget(target)
    d = target.dimension
    points = np.asarray(x, dtype=float)
    if d == 1 and (points.ndim == 0 or points.shape[-1] != 1):
        points = points[..., None]
    precision = np.linalg.inv(target.covariance)
    quad = np.einsum('...i,ij,...j->...', points, precision, points)
    density = np.exp(-0.5 * quad) / math.sqrt((2 * math.pi) ** d * target.determinant)
    return float(density) if np.ndim(density) == 0 else density


def sample_row_sums(spec: TriangularArraySpec, samples: int, streams: StreamFactory = None,
                    executor: TrialExecutorBase = None) -> np.ndarray:
    """Draws of S_n = sum_m X_{n,m} as a (samples, d) array."""
    return draw_points(spec.sampler, samples, streams or StreamFactory(0, "row-sums"), executor)


@dataclass
class SupnormReport:
    """Sup-norm distance between a histogram density and g_C.

    Attributes:
        distance (float): max over bins of |histogram density - g_C(bin centre)|
        argmax (np.ndarray): Centre of the bin attaining the distance
        std_error (float): Standard error of the histogram density in that bin
        bins (int): Bins per axis
        bin_width (float): Largest bin width
        samples (int): Number of draws
    """
    distance: float
    argmax: np.ndarray
    std_error: float
    bins: int
    bin_width: float
    samples: int


def default_bins(samples: int, d: int) -> int:
    """Bins per axis so that the width scales like samples^(-1/(d+2)) over the window."""
    return max(4, int(math.ceil(samples ** (1.0 / (d + 2)))))


def _check_window(target: GaussianTarget, window: Optional[Sequence[float]]) -> np.ndarray:
    minimum = WINDOW_SIGMAS * target.std
    if window is None:
        return minimum
    window = np.broadcast_to(np.asarray(window, dtype=float), minimum.shape)
    if np.any(window < minimum * (1 - 1e-12)):
        raise PreconditionError(f"window half widths {window.tolist()} must cover {WINDOW_SIGMAS:g} standard deviations")
    return window


def _supnorm(hist: DensityHistogram, target: GaussianTarget) -> SupnormReport:
    central = hist.total * hist.bin_area * target.peak
    if central < MIN_RELIABLE_COUNT:
        raise ResolutionError(f"central bin expects {central:.1f} draws; need {MIN_RELIABLE_COUNT} (use fewer bins or more samples)")
    centres = hist.centers()
    gaps = np.abs(hist.density - gaussian_density(target, centres))
    index = np.unravel_index(int(np.argmax(gaps)), hist.shape)
    return SupnormReport(
        distance=float(gaps[index]),
        argmax=centres[index],
        std_error=float(hist.std_error[index]),
        bins=int(hist.shape[0]),
        bin_width=float(np.max(hist.widths)),
        samples=int(hist.total),
    )


def supnorm_from_points(points: np.ndarray, target: GaussianTarget, window: Optional[Sequence[float]] = None,
                        bins: Optional[int] = None) -> SupnormReport:
    """Sup-norm distance for an explicit array of draws."""
    points = np.asarray(points, dtype=float)
    if points.ndim == 1:
        points = points[:, None]
    window = _check_window(target, window)
    hist = window_histogram(window, bins or default_bins(len(points), target.dimension))
    hist.add_points(points)
    return _supnorm(hist, target)


def supnorm_to_gaussian(spec: TriangularArraySpec, target: GaussianTarget, samples: int = 10_000_000,
                        streams: StreamFactory = None, executor: TrialExecutorBase = None,
                        window: Optional[Sequence[float]] = None, bins: Optional[int] = None) -> SupnormReport:
    """max over window bins of |histogram density of S_n - g_C(bin centre)|.

    Args:
        spec: Triangular array row
        target: Limit Gaussian
        samples: Number of draws of S_n
        streams: Substream factory
        executor: Executor for the sampling chunks
        window: Half widths of the centred box, at least 4 standard deviations (default exactly 4)
        bins: Bins per axis (default ceil(samples^(1/(d+2))))

    Raises:
        UnsupportedDimensionError: If d > 2
        PreconditionError: If the window is too small or the dimensions disagree
        ResolutionError: If the central bin expects fewer than 100 draws
    """
    if spec.dimension > 2:
        raise UnsupportedDimensionError(f"sup-norm checks are limited to d <= 2, got d={spec.dimension}")
    if target.dimension != spec.dimension:
        raise PreconditionError(f"target has dimension {target.dimension}, array has {spec.dimension}")
    window = _check_window(target, window)
    counter = GridCounter.like(window_histogram(window, bins or default_bins(samples, target.dimension)))
    chunks = map_chunks(spec.sampler, samples, streams or StreamFactory(0, "supnorm"), executor,
                        reducer=counter, label=f"row n={spec.n}")
    report = _supnorm(counter.collect(chunks, int(samples)), target)
    logging.info(f"Sup-norm distance at n={spec.n}: {report.distance:.6g}")
    return report


def estimator_floor(target: GaussianTarget, samples: int, window: Optional[Sequence[float]] = None,
                    bins: Optional[int] = None, subdivisions: int = 8) -> float:
    """Distance expected from binning alone: bin-average versus centre value, plus 4 peak standard errors.

    Bin averages are midpoint sums over `subdivisions` sub-cells per axis.
    """
    window = _check_window(target, window)
    hist = window_histogram(window, bins or default_bins(samples, target.dimension))
    centres = hist.centers()
    offsets = (np.arange(subdivisions) + 0.5) / subdivisions - 0.5
    grids = np.meshgrid(*[offsets * w for w in hist.widths], indexing='ij')
    shifts = np.stack(grids, axis=-1).reshape(-1, target.dimension)
    averages = np.mean([gaussian_density(target, centres + s) for s in shifts], axis=0)
    discretisation = float(np.max(np.abs(averages - gaussian_density(target, centres))))
    p = target.peak * hist.bin_area
    noise = math.sqrt(p * (1 - p) / samples) / hist.bin_area
    return discretisation + 4.0 * noise


def supnorm_schedule(row_for: Callable[[int], TriangularArraySpec], ns: Sequence[int], target: GaussianTarget, samples: int,
                     streams: StreamFactory, executor: TrialExecutorBase = None,
                     bins: Optional[int] = None) -> List[Tuple[int, SupnormReport]]:
    """Sup-norm distances along a schedule of row lengths, each row on its own child streams."""
    results = []
    for n in ns:
        spec = row_for(int(n))
        results.append((int(n), supnorm_to_gaussian(spec, target, samples, streams.child(f"n={n}"), executor, bins=bins)))
    return results
