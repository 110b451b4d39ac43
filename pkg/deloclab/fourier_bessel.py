"""
Bessel J0 and the Fourier-side density bound for five-term circle sums.

The Fourier transform of the uniform measure on the circle of radius r is
x -> J0(r |x|). Its decay |J0(r)| <= min(1, K / sqrt(r)) makes the product of
five such transforms integrable, which bounds the density of
a_1 X_1 + ... + a_5 X_5 by

    phi(b) = (2 pi)^-2 * integral over R^2 of prod_k min(1, K / sqrt(b_k |x|)) dx

whenever |a_k| >= b_k.
"""

import math
from dataclasses import dataclass
from typing import Sequence, Tuple, Union

import numpy as np
from scipy import integrate, optimize

from deloclab.errors import DimensionError, DomainError, PreconditionError

# lim sup of sqrt(r) |J0(r)|, the amplitude of the large-r asymptotic
BESSEL_K = math.sqrt(2.0 / math.pi)

SERIES_CUTOFF = 12.0
_SERIES_TERMS = 60
_ASYMPTOTIC_TERMS = 20

ArrayLike = Union[float, Sequence[float], np.ndarray]


@dataclass
class BesselEnvelope:
    """Envelope constant K with |J0(r)| <= min(1, K / sqrt(r)).

    Attributes:
        constant (float): Reported K, max(grid_max, sqrt(2/pi))
        r_max (float): Upper end of the searched range
        grid_max (float): Largest sqrt(r)|J0(r)| found on the refined grid
        argmax (float): Where grid_max is attained
    """
    constant: float
    r_max: float
    grid_max: float
    argmax: float


@dataclass
class FiveTermBound:
    """Density bound phi(b_1, ..., b_5)."""
    b: Tuple[float, ...]
    phi: float


def _series(r: np.ndarray) -> np.ndarray:
    quarter = (r / 2.0) ** 2
    term = np.ones_like(r)
    total = np.ones_like(r)
    for m in range(1, _SERIES_TERMS):
        term = -term * quarter / (m * m)
        total = total + term
    return total


def _asymptotic(r: np.ndarray) -> np.ndarray:
    # a_k = prod_{j<=k} (-(2j-1)^2) / (k! 8^k); even k feed P, odd k feed Q
    p = np.zeros_like(r)
    q = np.zeros_like(r)
    coefficient = 1.0
    power = np.ones_like(r)
    for k in range(_ASYMPTOTIC_TERMS):
        if k:
            coefficient *= -((2 * k - 1) ** 2) / (8.0 * k)
            power = power / r
        sign = -1.0 if (k // 2) % 2 else 1.0
        if k % 2 == 0:
            p = p + sign * coefficient * power
        else:
            q = q + sign * coefficient * power
    phase = r - math.pi / 4
    return np.sqrt(2.0 / (math.pi * r)) * (p * np.cos(phase) - q * np.sin(phase))


def bessel_j0(r: ArrayLike) -> Union[float, np.ndarray]:
    """Bessel function of the first kind of order 0.

    Power series up to r = 12, Hankel asymptotic expansion beyond; absolute
    error below 1e-10 on [0, 1e4].

    Args:
        r: Nonnegative scalar or array

    Returns:
        J0(r), a float for scalar input

    Raises:
        DomainError: If any r < 0 or is not finite
    """
    values = np.asarray(r, dtype=float)
    if np.any(~np.isfinite(values)) or np.any(values < 0):
        raise DomainError("J0 is evaluated on finite r >= 0 only")
    flat = values.ravel()
    result = np.empty_like(flat)
    small = flat <= SERIES_CUTOFF
    result[small] = _series(flat[small])
    result[~small] = _asymptotic(flat[~small])
    if values.ndim == 0:
        return float(result[0])
    return result.reshape(values.shape)


def bessel_j0_integral(r: float) -> float:
    """J0(r) = (1/pi) * integral_0^pi cos(r cos t) dt, by adaptive quadrature."""
    if r < 0:
        raise DomainError(f"J0 is evaluated on r >= 0 only, got {r}")
    value, _ = integrate.quad(lambda t: math.cos(r * math.cos(t)), 0.0, math.pi,
                              limit=max(100, int(4 * r) + 100), epsabs=1e-13, epsrel=1e-13)
    return value / math.pi


def fourier_uniform_circle(radius: float, x: ArrayLike) -> Union[float, np.ndarray]:
    """Fourier transform of the uniform measure on the circle of given radius, at x in R^2.

    Radial: the value is J0(radius * |x|). x may be one point or an (m, 2) array.
    """
    if not radius > 0:
        raise DomainError(f"circle radius must be positive, got {radius}")
    points = np.asarray(x, dtype=float)
    if points.shape[-1] != 2:
        raise DimensionError(f"points must live in R^2, got shape {points.shape}")
    return bessel_j0(radius * np.linalg.norm(points, axis=-1))


def _scaled_envelope(r: np.ndarray) -> np.ndarray:
    return np.sqrt(r) * np.abs(bessel_j0(r))


def envelope_constant(r_max: float = 1e4, resolution: float = 0.05) -> BesselEnvelope:
    """K = sup_r sqrt(r) |J0(r)| searched on (0, r_max].

    The grid maximum is polished with a bounded scalar search, then combined
    with the asymptotic amplitude sqrt(2/pi), which the local maxima approach
    from below.

    Args:
        r_max: Upper end of the search, at least 100
        resolution: Grid spacing in r

    Raises:
        PreconditionError: If r_max < 100 or the resolution is not positive
    """
    if r_max < 100:
        raise PreconditionError(f"r_max must be at least 100, got {r_max}")
    if not resolution > 0:
        raise PreconditionError(f"grid resolution must be positive, got {resolution}")
    grid = np.linspace(resolution, r_max, int(math.ceil(r_max / resolution)))
    values = _scaled_envelope(grid)
    i = int(np.argmax(values))
    lower, upper = grid[max(i - 1, 0)], grid[min(i + 1, grid.size - 1)]
    polished = optimize.minimize_scalar(lambda t: -float(_scaled_envelope(np.array([t]))[0]),
                                        bounds=(lower, upper), method='bounded', options={'xatol': 1e-10})
    grid_max, argmax = float(values[i]), float(grid[i])
    if -polished.fun > grid_max:
        grid_max, argmax = float(-polished.fun), float(polished.x)
    return BesselEnvelope(constant=max(grid_max, BESSEL_K), r_max=float(r_max), grid_max=grid_max, argmax=argmax)


def density_bound_five(b: Sequence[float], k: float = BESSEL_K) -> FiveTermBound:
    """Density bound phi(b_1, ..., b_5) for a_1 X_1 + ... + a_5 X_5 with |a_j| >= b_j.

    In polar coordinates phi = (1/2pi) * integral_0^inf rho * prod_j min(1, K / sqrt(b_j rho)) drho.
    The min switches at rho = K^2 / b_j; segments between switches are integrated
    with quad, the tail beyond the last switch in closed form.

    Args:
        b: Five positive lower bounds
        k: Envelope constant of J0

    Raises:
        DimensionError: If b does not hold five values
        DomainError: If any b_j <= 0
    """
    b = tuple(float(v) for v in b)
    if len(b) != 5:
        raise DimensionError(f"phi takes five bounds, got {len(b)}")
    if min(b) <= 0:
        raise DomainError(f"every b_j must be positive, got {b}")

    if max(b) == min(b):
        return FiveTermBound(b=b, phi=5.0 * k ** 4 / (4.0 * math.pi * b[0] ** 2))

    weights = np.asarray(b)
    switches = np.sort(k * k / weights)

    def integrand(rho: float) -> float:
        return rho * float(np.prod(np.minimum(1.0, k / np.sqrt(weights * rho))))

    total = switches[0] ** 2 / 2.0
    for lower, upper in zip(switches[:-1], switches[1:]):
        if upper > lower:
            segment, _ = integrate.quad(integrand, lower, upper, epsabs=0.0, epsrel=1e-12)
            total += segment
    total += 2.0 * k ** 5 / math.sqrt(float(np.prod(weights))) / math.sqrt(switches[-1])
    return FiveTermBound(b=b, phi=total / (2.0 * math.pi))


def bessel_lp_tail(p: float, radius: float, points_per_unit: int = 32) -> float:
    """integral over R <= |x| <= 2R of |J0(|x|)|^p dx, by composite Simpson quadrature.

    For p = 5 the result decays like R^(-1/2), so |J0|^5 is integrable on R^2.
    """
    if not radius > 0 or not p > 0:
        raise DomainError(f"need p > 0 and R > 0, got p={p}, R={radius}")
    count = int(radius * points_per_unit) | 1
    count = max(count, 1025)
    rho = np.linspace(radius, 2.0 * radius, count)
    return float(2.0 * math.pi * integrate.simpson(rho * np.abs(bessel_j0(rho)) ** p, x=rho))
