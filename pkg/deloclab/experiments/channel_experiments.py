# deloclab/experiments/channel_experiments.py

import logging
import math

import numpy as np

from deloclab.capacity import (epsilon_lower_bound, estimate_capacity_curve, small_ball_constant,
                               tail_probability, theoretical_floor)
from deloclab.channel import (ChannelRealization, apply_channel, circulant_matrix, exponential,
                              parse_profile, sample_awgn, zero_signal)
from deloclab.engine.experiment import Experiment, RunContext, experiment_schema, param
from deloclab.errors import ConfigError
from deloclab.settings import Z95


class ChannelExperiments(Experiment):
    """Capacity estimates and sanity checks of the circulant channel."""

    @experiment_schema(
        name="capacity",
        description="Monte Carlo capacity lower bound per channel use, tail chain and positivity floor",
        parameters=[
            param("N", "int", default=256, positive=True, help="Channel length"),
            param("P", "float_list", default=[1.0], positive=True, help="SNR values (common random numbers)"),
            param("profile", "str", default="flat", help="delta, flat, geometric(rho), sparse(k) or a JSON file"),
            param("trials", "int", default=10_000, minimum=2, help="Phase draws"),
            param("eps", "float_list", default=[0.1, 0.25, 0.5], positive=True, help="Truncation levels"),
            param("B", "float", positive=True, help="Concentration constant for the floor (fitted if absent)"),
        ],
    )
    def capacity(self, ctx: RunContext, params: dict) -> list:
        n = params["N"]
        profile = parse_profile(params["profile"], n)
        if not profile.is_unit_norm:
            raise ConfigError(f"profile {profile.name!r} must have unit norm (sum alpha^2 = {profile.energy:.15g})", "profile")
        trials = params["trials"]
        streams = ctx.streams
        logging.info(f"capacity: profile={profile.name} N={profile.n} P={params['P']} trials={trials}")

        records = []
        curve = estimate_capacity_curve(profile, params["P"], trials, streams.child("rates"), ctx.executor)
        tails = [tail_probability(profile, eps, trials, streams.child("tail"), ctx.executor) for eps in params["eps"]]
        if params.get("B") is not None:
            bound, bound_ci = params["B"], None
        else:
            fit = small_ball_constant(profile, params["eps"], trials, streams.child("tail"), ctx.executor)
            bound, bound_ci = fit.constant, fit.ci_radius
            records.append(self.record(ctx, "small_ball_B", bound, bound_ci, profile_name=profile.name, N=profile.n,
                                       trials=trials))

        for estimate in curve:
            echo = dict(profile_name=profile.name, N=profile.n, P=estimate.snr, trials=trials)
            records.append(self.record(ctx, "mean_rate", estimate.mean_rate, estimate.ci_radius, **echo))
            for tail in tails:
                log_term = math.log1p(estimate.snr * tail.epsilon ** 2)
                records.append(self.record(ctx, "eps_bound", epsilon_lower_bound(estimate.snr, tail.epsilon, tail.probability),
                                           log_term * tail.ci_radius, epsilon=tail.epsilon, **echo))
            floor = theoretical_floor(estimate.snr, bound)
            floor_ci = None
            if bound_ci is not None:
                # |d floor / d B| = P / (4 B^3 (1 + P / (4 B^2)))
                slope = estimate.snr / (4 * bound ** 3 * (1 + estimate.snr / (4 * bound ** 2)))
                floor_ci = slope * bound_ci
            records.append(self.record(ctx, "floor", floor, floor_ci, B=bound, **echo))
        for tail in tails:
            records.append(self.record(ctx, "tail", tail.probability, tail.ci_radius,
                                       profile_name=profile.name, N=profile.n, epsilon=tail.epsilon, trials=trials))
        return records

    @experiment_schema(
        name="channel-demo",
        description="One realization: Parseval, eigenvector and identity-channel residuals, noise power",
        parameters=[
            param("N", "int", default=16, positive=True, help="Channel length"),
            param("profile", "str", default="geometric(0.8)", help="Power profile"),
            param("samples", "int", default=1_000_000, positive=True, help="Noise samples for the power check"),
        ],
    )
    def channel_demo(self, ctx: RunContext, params: dict) -> list:
        n = params["N"]
        profile = parse_profile(params["profile"], n)
        streams = ctx.streams
        realization = ChannelRealization.sample(profile, streams.substream(0))
        echo = dict(profile_name=profile.name, N=n)

        dense = circulant_matrix(realization.profile, realization.phases)
        eigen_residual = 0.0
        dense_residual = 0.0
        for k in range(n):
            e_k = exponential(n, k)
            y = apply_channel(realization, e_k, zero_signal(n))
            eigen_residual = max(eigen_residual, float(np.max(np.abs(y.samples - realization.eigenvalues[k] * e_k.samples))))
            dense_residual = max(dense_residual, float(np.max(np.abs(dense @ e_k.samples - realization.eigenvalues[k] * e_k.samples))))

        identity = ChannelRealization.sample(parse_profile("delta", n), streams.substream(1))
        x = sample_awgn(n, streams.substream(2))
        rotated = apply_channel(identity, x, zero_signal(n)).samples
        # the delta profile passes x through, rotated by the single tap's phase
        identity_error = float(np.max(np.abs(rotated - np.exp(1j * identity.phases.angles[0]) * x.samples)))

        noise = sample_awgn(params["samples"], streams.substream(3)).samples
        power = np.abs(noise) ** 2
        power_ci = Z95 * float(np.std(power, ddof=1)) / math.sqrt(power.size)

        return [
            self.record(ctx, "parseval_error", realization.parseval_error(), **echo),
            self.record(ctx, "eigenvector_residual", eigen_residual, **echo),
            self.record(ctx, "dense_residual", dense_residual, **echo),
            self.record(ctx, "identity_error", identity_error, **echo),
            self.record(ctx, "noise_power", float(np.mean(power)), power_ci, **echo, samples=params["samples"]),
        ]
