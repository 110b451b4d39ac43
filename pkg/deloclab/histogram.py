"""
Binned density estimation on rectangular grids in R^1, R^2 and R^3.

Histograms are built chunk by chunk and merged by summing counts, so the
result does not depend on the order in which chunks arrive.
"""

from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from deloclab.errors import DimensionError, ResolutionError

MIN_RELIABLE_COUNT = 100


def as_points(points: np.ndarray) -> np.ndarray:
    """View draws as an (n, d) float array (1-D input becomes d = 1)."""
    points = np.asarray(points, dtype=float)
    if points.ndim == 1:
        points = points[:, None]
    if points.ndim != 2:
        raise DimensionError(f"points must be (n, d), got shape {points.shape}")
    return points


def default_bin_width(points: np.ndarray) -> float:
    """Bin width (support diameter) * n^(-1/(d+2)), the MSE-rate choice."""
    points = as_points(points)
    n, d = points.shape
    if n < 2:
        raise DimensionError("need at least two points to choose a bin width")
    diameter = float(np.max(points.max(axis=0) - points.min(axis=0)))
    return diameter * n ** (-1.0 / (d + 2))


@dataclass
class DensityHistogram:
    """Histogram density estimate on a regular grid.

    Attributes:
        origin (np.ndarray): Lower corner of the grid, shape (d,)
        widths (np.ndarray): Bin width per axis, shape (d,)
        counts (np.ndarray): Counts per bin, shape (n_1, ..., n_d)
        total (int): Number of draws, including the ones that fell outside the grid
    """
    origin: np.ndarray
    widths: np.ndarray
    counts: np.ndarray
    total: int

    def __post_init__(self):
        self.origin = np.atleast_1d(np.asarray(self.origin, dtype=float))
        self.widths = np.atleast_1d(np.asarray(self.widths, dtype=float))
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if not 1 <= self.dimension <= 3:
            raise DimensionError(f"histograms support d in 1..3, got {self.dimension}")
        if self.origin.shape != (self.dimension,) or self.widths.shape != (self.dimension,):
            raise DimensionError("origin and widths must have one entry per axis")
        if np.any(self.widths <= 0):
            raise DimensionError("bin widths must be positive")

    @property
    def dimension(self) -> int:
        return self.counts.ndim

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.counts.shape

    @property
    def bin_area(self) -> float:
        return float(np.prod(self.widths))

    @property
    def outside(self) -> int:
        return int(self.total - self.counts.sum())

    def edges(self):
        return [self.origin[a] + self.widths[a] * np.arange(self.shape[a] + 1) for a in range(self.dimension)]

    def axis_centers(self):
        return [self.origin[a] + self.widths[a] * (np.arange(self.shape[a]) + 0.5) for a in range(self.dimension)]

    def centers(self) -> np.ndarray:
        """Bin centres as an array of shape (n_1, ..., n_d, d)."""
        mesh = np.meshgrid(*self.axis_centers(), indexing='ij')
        return np.stack(mesh, axis=-1)

    @property
    def density(self) -> np.ndarray:
        return self.counts / (self.total * self.bin_area)

    @property
    def std_error(self) -> np.ndarray:
        """Binomial standard error of the density in each bin."""
        p = self.counts / self.total
        return np.sqrt(p * (1.0 - p) / self.total) / self.bin_area

    def integral(self) -> float:
        return float(self.density.sum() * self.bin_area)

    def expected_counts(self, pdf: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
        """Expected counts per bin under a reference density evaluated at bin centres."""
        return pdf(self.centers()) * self.bin_area * self.total

    def reliable(self, min_count: int = MIN_RELIABLE_COUNT) -> np.ndarray:
        return self.counts >= min_count

    def max_density(self, min_count: int = MIN_RELIABLE_COUNT) -> Tuple[float, float, Tuple[int, ...]]:
        """Largest density over reliable bins.

        Returns:
            Tuple of (density, standard error, bin index)

        Raises:
            ResolutionError: If no bin reaches `min_count`
        """
        mask = self.reliable(min_count)
        if not mask.any():
            raise ResolutionError(f"no bin holds {min_count} draws; bins too thin for {self.total} samples")
        masked = np.where(mask, self.density, -np.inf)
        index = np.unravel_index(int(np.argmax(masked)), self.shape)
        return float(self.density[index]), float(self.std_error[index]), tuple(int(i) for i in index)

    def add_points(self, points: np.ndarray) -> None:
        points = as_points(points)
        if points.shape[1] != self.dimension:
            raise DimensionError(f"expected {self.dimension}-D points, got {points.shape[1]}-D")
        counts, _ = np.histogramdd(points, bins=self.edges())
        self.counts = self.counts + counts.astype(np.int64)
        self.total += len(points)

    def merge(self, other: "DensityHistogram") -> "DensityHistogram":
        if self.shape != other.shape or not np.allclose(self.origin, other.origin) or not np.allclose(self.widths, other.widths):
            raise DimensionError("cannot merge histograms on different grids")
        return DensityHistogram(self.origin, self.widths, self.counts + other.counts, self.total + other.total)

    @classmethod
    def empty(cls, origin: Sequence[float], widths: Sequence[float], shape: Sequence[int]) -> "DensityHistogram":
        return cls(origin=origin, widths=widths, counts=np.zeros(tuple(int(s) for s in shape), dtype=np.int64), total=0)

    @classmethod
    def from_points(cls, points: np.ndarray, origin: Sequence[float], widths: Sequence[float], shape: Sequence[int]) -> "DensityHistogram":
        hist = cls.empty(origin, widths, shape)
        hist.add_points(points)
        return hist

    @classmethod
    def covering(cls, points: np.ndarray, width: Optional[float] = None) -> "DensityHistogram":
        """Histogram whose grid covers every point, with square bins."""
        points = as_points(points)
        width = default_bin_width(points) if width is None else float(width)
        lower = np.floor(points.min(axis=0) / width) * width
        shape = np.floor((points.max(axis=0) - lower) / width).astype(int) + 1
        return cls.from_points(points, lower, np.full(points.shape[1], width), shape)


@dataclass
class GridCounter:
    """Picklable per-chunk reducer: bins a chunk of draws on a fixed grid."""
    origin: np.ndarray
    widths: np.ndarray
    shape: Tuple[int, ...]

    def __call__(self, points: np.ndarray) -> np.ndarray:
        return DensityHistogram.from_points(points, self.origin, self.widths, self.shape).counts

    def collect(self, chunk_counts: Sequence[np.ndarray], total: int) -> DensityHistogram:
        counts = np.sum(np.stack(list(chunk_counts)), axis=0)
        return DensityHistogram(self.origin, self.widths, counts, total)

    @classmethod
    def like(cls, hist: DensityHistogram) -> "GridCounter":
        return cls(hist.origin, hist.widths, hist.shape)


def window_histogram(half_widths: Sequence[float], bins: int) -> DensityHistogram:
    """Empty histogram on the centred box prod [-w_a, w_a] with `bins` bins per axis."""
    half_widths = np.asarray(half_widths, dtype=float)
    return DensityHistogram.empty(-half_widths, 2.0 * half_widths / bins, [bins] * len(half_widths))


def annulus_area(radius: float, half_width: float, sectors: int = 1) -> float:
    """Area of one of `sectors` equal sectors of the annulus radius +/- half_width."""
    inner = max(radius - half_width, 0.0)
    outer = radius + half_width
    return np.pi * (outer ** 2 - inner ** 2) / sectors


def annulus_counts(radii: np.ndarray, radius: float, half_width: float,
                   angles: Optional[np.ndarray] = None, sectors: int = 1) -> np.ndarray:
    """Draws falling in a thin annulus, optionally split in equal angular sectors.

    Args:
        radii: |x| of every draw
        radius: Centre radius of the annulus
        half_width: Half the annulus thickness
        angles: arg(x) of every draw, required when sectors > 1
        sectors: Number of equal angular sectors starting at angle 0

    Returns:
        Integer counts, one entry per sector
    """
    inner = max(radius - half_width, 0.0)
    inside = (radii >= inner) & (radii < radius + half_width)
    if sectors == 1:
        return np.array([int(inside.sum())], dtype=np.int64)
    if angles is None:
        raise DimensionError("angles are required for sector counts")
    sector = np.floor(np.mod(angles[inside], 2 * np.pi) / (2 * np.pi / sectors)).astype(int)
    return np.bincount(np.minimum(sector, sectors - 1), minlength=sectors).astype(np.int64)


def annulus_density(counts: np.ndarray, radius: float, half_width: float, total: int,
                    sectors: int = 1) -> Tuple[np.ndarray, np.ndarray]:
    """Planar density and its binomial standard error from annulus counts."""
    area = annulus_area(radius, half_width, sectors)
    p = np.asarray(counts, dtype=float) / total
    return p / area, np.sqrt(p * (1 - p) / total) / area
