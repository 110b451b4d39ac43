"""
Circulant LTI channel under the phase-independence assumption.

The channel acts on C^N by cyclic convolution with taps alpha_m * X_m, where
alpha is a fixed nonnegative power profile and the phases X_m are i.i.d.
uniform on the unit circle:

    y[n] = sum_m alpha_m X_m x[(n - m) mod N] + w[n]

Eigenvalues are indexed k = 0..N-1 with the kernel exp(-2 pi i k m / N);
k = 0 plays the role of k = N in a 1-based count, since both give the same
exponential.
"""

import json
import os
import re
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg

from deloclab.errors import ConfigError, DimensionError

UNIT_NORM_TOL = 1e-12


def _check_dimension(n: int) -> int:
    if int(n) != n or n < 1:
        raise DimensionError(f"dimension must be a positive integer, got {n}")
    return int(n)


# --- Domain types ---

@dataclass(frozen=True, eq=False)
class PowerProfile:
    """Nonnegative attenuation magnitudes alpha_0..alpha_{N-1}.

    Attributes:
        coefficients (np.ndarray): Tap magnitudes, all >= 0
        name (str): Label echoed in result files
    """
    coefficients: np.ndarray
    name: str = "custom"

    def __post_init__(self):
        coefficients = np.asarray(self.coefficients, dtype=float).ravel()
        if coefficients.size == 0:
            raise DimensionError("a power profile needs at least one tap")
        if not np.all(np.isfinite(coefficients)) or np.any(coefficients < 0):
            raise ValueError("profile coefficients must be finite and nonnegative")
        coefficients.setflags(write=False)
        object.__setattr__(self, 'coefficients', coefficients)

    @property
    def n(self) -> int:
        return int(self.coefficients.size)

    @property
    def energy(self) -> float:
        return float(np.sum(self.coefficients ** 2))

    @property
    def is_unit_norm(self) -> bool:
        return abs(self.energy - 1.0) <= UNIT_NORM_TOL

    def normalized(self) -> "PowerProfile":
        energy = self.energy
        if energy == 0:
            raise ValueError("cannot normalize an all-zero profile")
        return PowerProfile(self.coefficients / np.sqrt(energy), self.name)

    def cyclic_shift(self, shift: int) -> "PowerProfile":
        return PowerProfile(np.roll(self.coefficients, shift), f"{self.name}>>{shift}")

    # --- Presets ---

    @classmethod
    def delta(cls, n: int) -> "PowerProfile":
        n = _check_dimension(n)
        coefficients = np.zeros(n)
        coefficients[0] = 1.0
        return cls(coefficients, "delta")

    @classmethod
    def flat(cls, n: int) -> "PowerProfile":
        n = _check_dimension(n)
        return cls(np.full(n, 1.0 / np.sqrt(n)), "flat")

    @classmethod
    def geometric(cls, n: int, rho: float) -> "PowerProfile":
        n = _check_dimension(n)
        if not 0 < rho <= 1:
            raise ValueError(f"geometric decay must lie in (0, 1], got {rho}")
        return cls(rho ** np.arange(n), f"geometric({rho:g})").normalized()

    @classmethod
    def sparse(cls, n: int, k: int) -> "PowerProfile":
        n = _check_dimension(n)
        if not 1 <= k <= n:
            raise ValueError(f"sparse profile needs 1 <= k <= N, got k={k}, N={n}")
        coefficients = np.zeros(n)
        coefficients[:k] = 1.0 / np.sqrt(k)
        return cls(coefficients, f"sparse({k})")

    @classmethod
    def from_json(cls, text: str, name: str = "json") -> "PowerProfile":
        values = json.loads(text)
        if not isinstance(values, list) or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in values):
            raise ValueError("profile JSON must be an array of numbers")
        return cls(np.asarray(values, dtype=float), name)


_PRESET = re.compile(r"^\s*(delta|flat|geometric|sparse)\s*(?:\(\s*([^)]*)\s*\))?\s*$")


def parse_profile(text: str, n: Optional[int] = None) -> PowerProfile:
    """Build a profile from a preset expression or a JSON file path.

    Args:
        text: "delta", "flat", "geometric(0.9)", "sparse(3)" or a path to a JSON array
        n: Channel length, required for presets

    Returns:
        The profile; JSON profiles are used as given

    Raises:
        ConfigError: If the expression cannot be understood
    """
    match = _PRESET.match(text)
    if match:
        kind, argument = match.group(1), match.group(2)
        if n is None:
            raise ConfigError("preset profiles need N", "N")
        try:
            if kind == "delta":
                return PowerProfile.delta(n)
            if kind == "flat":
                return PowerProfile.flat(n)
            if argument is None:
                raise ConfigError(f"{kind} needs an argument, e.g. {kind}(2)", "profile")
            if kind == "geometric":
                return PowerProfile.geometric(n, float(argument))
            return PowerProfile.sparse(n, int(argument))
        except (ValueError, DimensionError) as e:
            raise ConfigError(str(e), "profile")
    if os.path.exists(text):
        try:
            with open(text, 'r') as f:
                return PowerProfile.from_json(f.read(), name=os.path.basename(text))
        except (ValueError, json.JSONDecodeError) as e:
            raise ConfigError(f"invalid profile file {text}: {e}", "profile")
    raise ConfigError(f"unknown profile {text!r}", "profile")


@dataclass(frozen=True, eq=False)
class PhaseVector:
    """Tap phases stored as angles in [0, 2 pi); X_m = exp(i * angle_m)."""
    angles: np.ndarray

    def __post_init__(self):
        angles = np.asarray(self.angles, dtype=float).ravel()
        if np.any(angles < 0) or np.any(angles >= 2 * np.pi):
            raise ValueError("phase angles must lie in [0, 2 pi)")
        angles.setflags(write=False)
        object.__setattr__(self, 'angles', angles)

    @property
    def n(self) -> int:
        return int(self.angles.size)

    def unit(self) -> np.ndarray:
        return np.exp(1j * self.angles)

    def rotated(self, theta: float) -> "PhaseVector":
        angles = np.mod(self.angles + theta, 2 * np.pi)
        # mod of a tiny negative angle rounds up to exactly 2 pi
        return PhaseVector(np.where(angles >= 2 * np.pi, 0.0, angles))


@dataclass(frozen=True, eq=False)
class Signal:
    """N complex samples (x, y or noise)."""
    samples: np.ndarray

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=complex).ravel()
        object.__setattr__(self, 'samples', samples)

    @property
    def n(self) -> int:
        return int(self.samples.size)


@dataclass(frozen=True, eq=False)
class ChannelRealization:
    """One draw of H_N: profile, phases and the derived eigenvalues."""
    profile: PowerProfile
    phases: PhaseVector
    eigenvalues: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.profile.n != self.phases.n:
            raise DimensionError(f"profile has {self.profile.n} taps but {self.phases.n} phases were given")
        if self.eigenvalues is None:
            object.__setattr__(self, 'eigenvalues', eigenvalues(self.profile, self.phases))

    @property
    def n(self) -> int:
        return self.profile.n

    @property
    def taps(self) -> np.ndarray:
        return self.profile.coefficients * self.phases.unit()

    def parseval_error(self) -> float:
        """Relative gap between sum |lambda_k|^2 and N * sum alpha_m^2."""
        expected = self.n * self.profile.energy
        actual = float(np.sum(np.abs(self.eigenvalues) ** 2))
        return abs(actual - expected) / expected if expected else actual

    @classmethod
    def sample(cls, profile: PowerProfile, rng: np.random.Generator) -> "ChannelRealization":
        return cls(profile, sample_phases(profile.n, rng))


# --- Operations ---

def sample_phases(n: int, rng: np.random.Generator) -> PhaseVector:
    """Draw n i.i.d. uniform phases on [0, 2 pi) from the given stream.

    Raises:
        DimensionError: If n < 1
    """
    n = _check_dimension(n)
    # uniform() is on [0, 1), so the product stays below 2 pi
    return PhaseVector(2 * np.pi * rng.random(n))


def transfer(coefficients: np.ndarray, angles: np.ndarray) -> np.ndarray:
    """Eigenvalues for one or a batch of realizations (last axis = tap index)."""
    return np.fft.fft(coefficients * np.exp(1j * angles), axis=-1)


def eigenvalues(profile: PowerProfile, phases: PhaseVector) -> np.ndarray:
    """lambda_k = sum_m alpha_m X_m exp(-2 pi i k m / N), k = 0..N-1.

    Raises:
        DimensionError: If profile and phases differ in length
    """
    if profile.n != phases.n:
        raise DimensionError(f"profile has {profile.n} taps but {phases.n} phases were given")
    return transfer(profile.coefficients, phases.angles)


def circulant_matrix(profile: PowerProfile, phases: PhaseVector) -> np.ndarray:
    """Dense matrix of H_N: entry (n, j) = alpha_{(n-j) mod N} X_{(n-j) mod N}."""
    if profile.n != phases.n:
        raise DimensionError(f"profile has {profile.n} taps but {phases.n} phases were given")
    return scipy.linalg.circulant(profile.coefficients * phases.unit())


def exponential(n: int, k: int) -> Signal:
    """Eigenvector e_k[m] = exp(2 pi i k m / N)."""
    n = _check_dimension(n)
    return Signal(np.exp(2j * np.pi * k * np.arange(n) / n))


def apply_channel(realization: ChannelRealization, signal: Signal, noise: Signal) -> Signal:
    """y = H_N(x) + w computed in the eigenbasis.

    Raises:
        DimensionError: If the signal or noise length differs from N
    """
    n = realization.n
    if signal.n != n or noise.n != n:
        raise DimensionError(f"channel length {n}, signal length {signal.n}, noise length {noise.n}")
    convolved = np.fft.ifft(realization.eigenvalues * np.fft.fft(signal.samples))
    return Signal(convolved + noise.samples)


def sample_awgn(n: int, rng: np.random.Generator) -> Signal:
    """n i.i.d. circularly symmetric complex Gaussians with E|w|^2 = 1.

    Raises:
        DimensionError: If n < 1
    """
    n = _check_dimension(n)
    parts = rng.standard_normal((2, n)) * np.sqrt(0.5)
    return Signal(parts[0] + 1j * parts[1])


def zero_signal(n: int) -> Signal:
    return Signal(np.zeros(_check_dimension(n), dtype=complex))

