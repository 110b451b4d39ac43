"""
Capacity lower bounds for the circulant channel with Q = P * I_N.

- Per-realization mutual information sum_k ln(1 + P |lambda_k|^2), in nats
- Monte Carlo estimates of its expectation per channel use
- The epsilon-truncation chain and the positivity floor 1/2 ln(1 + P / (4 B^2))

Trial t always draws its phases from substream t, and trials are grouped in
fixed blocks of TRIAL_BLOCK, so estimates are bitwise reproducible for a given
(seed, trials) whatever the number of workers.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from deloclab.channel import PowerProfile, sample_phases, transfer
from deloclab.engine.base_executor import TrialExecutorBase
from deloclab.engine.trial_executor import TrialExecutor
from deloclab.errors import PreconditionError
from deloclab.settings import Z95
from deloclab.streams import StreamFactory

TRIAL_BLOCK = 256
MAX_FLOOR_ITERATIONS = 200


@dataclass
class CapacityEstimate:
    """Monte Carlo estimate of E[(1/N) log det(I + P |H_N|^2)].

    Attributes:
        snr (float): Signal to noise ratio P
        n (int): Channel length N
        trials (int): Number of phase draws
        mean_rate (float): Mean rate in nats per channel use
        ci_radius (float): 95% normal-approximation half-width
        std_error (float): Standard error of the mean
        profile_name (str): Name of the power profile
    """
    snr: float
    n: int
    trials: int
    mean_rate: float
    ci_radius: float
    std_error: float
    profile_name: str = "custom"


@dataclass
class TailEstimate:
    """Estimate of P{|lambda_0| >= epsilon} with its 95% half-width."""
    epsilon: float
    probability: float
    ci_radius: float
    trials: int
    std_error: float = 0.0


@dataclass
class SmallBallFit:
    """Linear small-ball constant of |lambda_0| fitted over an epsilon grid.

    Attributes:
        constant (float): max of the upper 95% bound of P{|lambda_0| < eps} / eps over the grid and the floor point 1/(2B)
        epsilons (List[float]): Grid points, followed by the floor points that raised B
        probabilities (List[float]): Point estimates of P{|lambda_0| < eps}
        ratios (List[float]): Point estimates divided by eps
        ci_radius (float): 95% half-width of the point ratio at the grid point setting the constant
    """
    constant: float
    ci_radius: float = 0.0
    epsilons: List[float] = field(default_factory=list)
    probabilities: List[float] = field(default_factory=list)
    ratios: List[float] = field(default_factory=list)


def _require_unit_norm(profile: PowerProfile) -> None:
    if not profile.is_unit_norm:
        raise PreconditionError(f"profile {profile.name!r} is not unit norm (sum alpha^2 = {profile.energy:.15g})")


def _require_trials(trials: int, minimum: int = 1) -> int:
    if int(trials) != trials or trials < minimum:
        raise PreconditionError(f"need at least {minimum} trials, got {trials}")
    return int(trials)


def _executor(executor: Optional[TrialExecutorBase]) -> TrialExecutorBase:
    return executor if executor is not None else TrialExecutor(workers=1, progress=False)


def _block_count(trials: int) -> int:
    return -(-trials // TRIAL_BLOCK)


def _draw_angles(n: int, streams: StreamFactory, start: int, stop: int) -> np.ndarray:
    return np.stack([sample_phases(n, streams.substream(t)).angles for t in range(start, stop)])


# --- Block tasks (picklable, one call per block of trials) ---

@dataclass
class _TrialBlock:
    coefficients: np.ndarray
    streams: StreamFactory
    trials: int

    def angles(self, block: int) -> np.ndarray:
        start = block * TRIAL_BLOCK
        stop = min(start + TRIAL_BLOCK, self.trials)
        return _draw_angles(self.coefficients.size, self.streams, start, stop)


@dataclass
class _RateBlock(_TrialBlock):
    snrs: np.ndarray = None

    def __call__(self, block: int) -> np.ndarray:
        power = np.abs(transfer(self.coefficients, self.angles(block))) ** 2
        return np.log1p(self.snrs[:, None, None] * power[None]).sum(axis=-1) / self.coefficients.size


@dataclass
class _LeadingMagnitudeBlock(_TrialBlock):

    def __call__(self, block: int) -> np.ndarray:
        return np.abs(np.exp(1j * self.angles(block)) @ self.coefficients)


def _leading_magnitudes(profile: PowerProfile, trials: int, streams: StreamFactory,
                        executor: Optional[TrialExecutorBase]) -> np.ndarray:
    task = _LeadingMagnitudeBlock(profile.coefficients, streams, trials)
    blocks = _executor(executor).execute(task, range(_block_count(trials)), label="tail trials")
    return np.concatenate(blocks)


# --- Operations ---

def mutual_info_flat(eigenvalues: Sequence[complex], snr: float) -> float:
    """sum_k ln(1 + P |lambda_k|^2), the log det of I + P |H_N|^2 in nats.

    Raises:
        PreconditionError: If P <= 0
    """
    if not snr > 0:
        raise PreconditionError(f"P must be positive, got {snr}")
    power = np.abs(np.asarray(eigenvalues, dtype=complex)) ** 2
    return float(np.sum(np.log1p(snr * power)))


def estimate_capacity_curve(profile: PowerProfile, snrs: Sequence[float], trials: int = 10_000,
                            streams: StreamFactory = None, executor: TrialExecutorBase = None) -> List[CapacityEstimate]:
    """Capacity lower bounds for several P values from one set of phase draws.

    Every P value sees the same realizations (common random numbers), so the
    curve is nondecreasing in P trial by trial.

    Args:
        profile: Unit-norm power profile
        snrs: Values of P, all positive
        trials: Number of phase draws, at least 2
        streams: Source of per-trial substreams
        executor: Executor for trial blocks (in-process by default)

    Returns:
        One CapacityEstimate per P, in input order

    Raises:
        PreconditionError: If the profile is not unit norm, a P is not positive or trials < 2
    """
    _require_unit_norm(profile)
    trials = _require_trials(trials, 2)
    snrs = np.asarray(list(snrs), dtype=float)
    if snrs.size == 0 or np.any(~(snrs > 0)):
        raise PreconditionError(f"every P must be positive, got {snrs.tolist()}")
    streams = streams or StreamFactory(0, "capacity")

    logging.info(f"Estimating capacity for profile {profile.name} (N={profile.n}) at P={snrs.tolist()} over {trials} trials")
    task = _RateBlock(profile.coefficients, streams, trials, snrs=snrs)
    blocks = _executor(executor).execute(task, range(_block_count(trials)), label="capacity trials")
    rates = np.concatenate(blocks, axis=1)

    estimates = []
    for snr, row in zip(snrs, rates):
        std_error = float(np.std(row, ddof=1) / np.sqrt(trials))
        estimates.append(CapacityEstimate(
            snr=float(snr),
            n=profile.n,
            trials=trials,
            mean_rate=float(np.mean(row)),
            ci_radius=Z95 * std_error,
            std_error=std_error,
            profile_name=profile.name,
        ))
    return estimates


def estimate_capacity_lb(profile: PowerProfile, snr: float, trials: int = 10_000,
                         streams: StreamFactory = None, executor: TrialExecutorBase = None) -> CapacityEstimate:
    """Monte Carlo mean of mutual_info_flat / N over fresh phase draws.

    Raises:
        PreconditionError: If the profile is not unit norm, P <= 0 or trials < 2
    """
    return estimate_capacity_curve(profile, [snr], trials, streams, executor)[0]


def tail_probability(profile: PowerProfile, epsilon: float, trials: int = 10_000,
                     streams: StreamFactory = None, executor: TrialExecutorBase = None) -> TailEstimate:
    """Fraction of trials with |lambda_0| >= epsilon.

    lambda_0 = sum_m alpha_m X_m; every lambda_k has the same law, so the index is immaterial.

    Raises:
        PreconditionError: If the profile is not unit norm, epsilon <= 0 or trials < 1
    """
    _require_unit_norm(profile)
    if not epsilon > 0:
        raise PreconditionError(f"epsilon must be positive, got {epsilon}")
    trials = _require_trials(trials)
    magnitudes = _leading_magnitudes(profile, trials, streams or StreamFactory(0, "tail"), executor)
    p = float(np.mean(magnitudes >= epsilon))
    std_error = float(np.sqrt(p * (1 - p) / trials))
    return TailEstimate(epsilon=float(epsilon), probability=p, ci_radius=Z95 * std_error, trials=trials, std_error=std_error)


def epsilon_lower_bound(snr: float, epsilon: float, tail: float) -> float:
    """ln(1 + P eps^2) * P{|lambda| >= eps}, the truncated lower bound on the rate.

    Raises:
        PreconditionError: If P or epsilon is not positive, or tail is outside [0, 1]
    """
    if not snr > 0 or not epsilon > 0:
        raise PreconditionError(f"P and epsilon must be positive, got P={snr}, epsilon={epsilon}")
    if not 0 <= tail <= 1:
        raise PreconditionError(f"tail probability must lie in [0, 1], got {tail}")
    return float(np.log1p(snr * epsilon ** 2) * tail)


def theoretical_floor(snr: float, bound: float) -> float:
    """1/2 ln(1 + P / (4 B^2)), the rate floor obtained with epsilon = 1 / (2B)."""
    if not snr > 0 or not bound > 0:
        raise PreconditionError(f"P and B must be positive, got P={snr}, B={bound}")
    return float(0.5 * np.log1p(snr / (4.0 * bound ** 2)))


def proof_chain_holds(eigenvalues: Sequence[complex], snr: float, epsilon: float) -> bool:
    """Check (1/N) sum ln(1 + P|lambda_k|^2) >= ln(1 + P eps^2) * (1/N) #{|lambda_k| >= eps} for one realization."""
    eigenvalues = np.asarray(eigenvalues, dtype=complex)
    if eigenvalues.size == 0:
        return True
    n = eigenvalues.size
    realized_tail = float(np.count_nonzero(np.abs(eigenvalues) >= epsilon)) / n
    return mutual_info_flat(eigenvalues, snr) / n >= epsilon_lower_bound(snr, epsilon, realized_tail)


def small_ball_constant(profile: PowerProfile, eps_grid: Sequence[float], trials: int = 10_000,
                        streams: StreamFactory = None, executor: TrialExecutorBase = None) -> SmallBallFit:
    """Fit B with P{|lambda_0| < eps} <= B eps over a grid of eps.

    The constant uses the upper end of each 95% interval; grid points with no
    hit fall back to the rule of three (3 / trials), so the fit stays positive.
    The floor applies the bound at eps* = 1/(2B), so eps* joins the grid and B
    is raised until the bound also holds there.

    Raises:
        PreconditionError: If the profile is not unit norm, the grid is empty or holds a non-positive eps
    """
    _require_unit_norm(profile)
    trials = _require_trials(trials)
    epsilons = [float(e) for e in eps_grid]
    if not epsilons or min(epsilons) <= 0:
        raise PreconditionError(f"epsilon grid must be non-empty and positive, got {epsilons}")
    magnitudes = np.sort(_leading_magnitudes(profile, trials, streams or StreamFactory(0, "small-ball"), executor))

    def evaluate(eps: float):
        hits = int(np.searchsorted(magnitudes, eps, side='left'))
        p = hits / trials
        radius = Z95 * np.sqrt(p * (1 - p) / trials)
        p_upper = p + radius if hits else 3.0 / trials
        return p, radius / eps, p_upper / eps

    fit = SmallBallFit(constant=0.0)

    def add(eps: float, p: float, radius: float, upper: float):
        fit.epsilons.append(eps)
        fit.probabilities.append(p)
        fit.ratios.append(p / eps)
        if upper > fit.constant:
            fit.constant, fit.ci_radius = float(upper), float(radius)

    for eps in epsilons:
        add(eps, *evaluate(eps))
    for _ in range(MAX_FLOOR_ITERATIONS):
        eps = 0.5 / fit.constant
        p, radius, upper = evaluate(eps)
        if upper <= fit.constant:
            break
        add(eps, p, radius, upper)
    logging.info(f"Small-ball constant for {profile.name} (N={profile.n}): {fit.constant:.6g}")
    return fit


def floor_from_profile(profile: PowerProfile, snr: float, eps_grid: Sequence[float], trials: int = 10_000,
                       streams: StreamFactory = None, executor: TrialExecutorBase = None) -> float:
    """theoretical_floor(P, B) with B fitted from the profile's own eigenvalue small-ball law."""
    fit = small_ball_constant(profile, eps_grid, trials, streams, executor)
    return theoretical_floor(snr, fit.constant)
