# deloclab/experiments/delocalisation_experiments.py

import logging
import math

import numpy as np

from deloclab.capacity import theoretical_floor
from deloclab.delocalisation import (CircleSumSampler, WeightVector, circle_concentration, sampler_histogram,
                                     sharpness_check, threefold_log_singularity,
                                     verify_bn_bound, verify_quadratic_bound)
from deloclab.engine.experiment import Experiment, RunContext, experiment_schema, param
from deloclab.errors import ConfigError
from deloclab.fourier_bessel import density_bound_five
from deloclab.settings import Z95

WEIGHT_KINDS = ("flat", "basis", "random", "s4")


def _ratio_ci(value: float, parts) -> float:
    """Delta-method half-width of a ratio or product of independent estimates given (estimate, ci) parts."""
    return abs(value) * math.sqrt(sum((ci / est) ** 2 for est, ci in parts if est))


class DelocalisationExperiments(Experiment):
    """Concentration function estimates and the delocalisation checks built on them."""

    def _weights(self, ctx: RunContext, kind: str, n: int, epsilon0: float) -> WeightVector:
        rng = ctx.streams.child("weights").substream(0)
        if kind == "flat":
            return WeightVector.flat(n)
        if kind == "basis":
            return WeightVector.basis(n)
        if kind == "random":
            return WeightVector.random_unit(n, rng)
        if n < 5:
            raise ConfigError(f"s4 weights need N >= 5, got {n}", "N")
        return WeightVector.random_s4(n, epsilon0, rng)

    @experiment_schema(
        name="concentration",
        description="Levy concentration C_eps of a weighted circle sum against a single circle variable",
        parameters=[
            param("N", "int", default=1, positive=True, help="Number of terms"),
            param("weights", "str", default="flat", choices=WEIGHT_KINDS, help="Weight vector"),
            param("eps", "float_list", default=[0.05, 0.1, 0.2], positive=True, help="Ball radii"),
            param("samples", "int", default=1_000_000, minimum=1000, help="Draws per estimate"),
            param("epsilon0", "float", default=0.1, positive=True, help="Class margin for s4 weights"),
        ],
    )
    def concentration(self, ctx: RunContext, params: dict) -> list:
        weights = self._weights(ctx, params["weights"], params["N"], params["epsilon0"])
        logging.info(f"concentration: N={weights.n} weights={params['weights']} eps={params['eps']}")
        records = []
        for item in verify_bn_bound(weights, params["eps"], params["samples"], ctx.streams, ctx.executor):
            estimate, reference = item.sum_estimate, item.reference_estimate
            echo = dict(weights=params["weights"], N=weights.n, epsilon0=params["epsilon0"], epsilon=item.epsilon,
                        samples=params["samples"])
            shift = dict(argmax_x=float(estimate.argmax_shift[0]), argmax_y=float(estimate.argmax_shift[1]))
            records.append(self.record(ctx, "concentration", estimate.value, estimate.ci_radius, **echo, **shift))
            records.append(self.record(ctx, "circle_concentration", reference.value, reference.ci_radius, **echo))
            records.append(self.record(ctx, "circle_exact", circle_concentration(item.epsilon), **echo))
            records.append(self.record(ctx, "bn_ratio", item.ratio,
                                       _ratio_ci(item.ratio, [(estimate.value, estimate.ci_radius),
                                                              (reference.value, reference.ci_radius)]), **echo))
        return records

    @experiment_schema(
        name="quadratic",
        description="Quadratic small-ball law C_eps <= B eps^2 for flat weights in S4, and the capacity floor it implies",
        parameters=[
            param("N", "int_list", default=[5, 10, 50, 100], positive=True, help="Numbers of terms"),
            param("epsilon0", "float", default=0.1, positive=True, help="Class margin"),
            param("eps", "float_list", default=[0.02, 0.05, 0.1, 0.2, 0.3], positive=True, help="Ball radii"),
            param("samples", "int", default=1_000_000, minimum=1000, help="Draws per N"),
            param("P", "float", default=1.0, positive=True, help="SNR for the implied floor"),
        ],
    )
    def quadratic(self, ctx: RunContext, params: dict) -> list:
        if not 0 < params["epsilon0"] < 1:
            raise ConfigError(f"must lie in (0, 1), got {params['epsilon0']}", "epsilon0")
        records = []
        fits = []
        for n in params["N"]:
            fit = verify_quadratic_bound(WeightVector.flat(n), params["epsilon0"], params["eps"], params["samples"],
                                         ctx.streams.child(f"N={n}"), ctx.executor)
            fits.append(fit)
            echo = dict(N=n, epsilon0=params["epsilon0"], samples=params["samples"])
            for eps, ratio, estimate in zip(params["eps"], fit.ratios, fit.estimates):
                records.append(self.record(ctx, "ratio", ratio, estimate.ci_radius / eps ** 2, epsilon=eps, **echo))
            records.append(self.record(ctx, "B_hat", fit.constant, fit.ci_radius, epsilon=fit.epsilon, **echo))

        pairs = [(ratio, est.ci_radius / est.epsilon ** 2) for fit in fits for ratio, est in zip(fit.ratios, fit.estimates)]
        high = max(pairs, key=lambda p: p[0])
        low = min(pairs, key=lambda p: p[0])
        summary = dict(epsilon0=params["epsilon0"], samples=params["samples"])
        records.append(self.record(ctx, "B_hat_max", high[0], high[1], **summary))
        spread = high[0] / low[0]
        records.append(self.record(ctx, "spread", spread, _ratio_ci(spread, [high, low]), **summary))

        snr = params["P"]
        floor = theoretical_floor(snr, high[0])
        slope = snr / (4 * high[0] ** 3 * (1 + snr / (4 * high[0] ** 2)))
        records.append(self.record(ctx, "floor", floor, slope * high[1], P=snr, **summary))
        return records

    @experiment_schema(
        name="sharpness",
        description="Small-ball law of (X_1 + X_2 + X_3 + X_4) / 2, a unit vector outside every S4 class",
        parameters=[
            param("eps", "float_list", default=[0.01, 0.02, 0.05, 0.1, 0.2], positive=True, help="Ball radii"),
            param("samples", "int", default=1_000_000, positive=True, help="Draws"),
        ],
    )
    def sharpness(self, ctx: RunContext, params: dict) -> list:
        report = sharpness_check(params["eps"], params["samples"], ctx.streams, ctx.executor)
        records = []
        for point in report.points:
            echo = dict(epsilon=point.epsilon, samples=params["samples"])
            records.append(self.record(ctx, "probability", point.probability, point.ci_radius, **echo))
            records.append(self.record(ctx, "linear_ratio", point.linear_ratio, point.ci_radius / point.epsilon, **echo))
            records.append(self.record(ctx, "quadratic_ratio", point.quadratic_ratio, point.ci_radius / point.epsilon ** 2, **echo))

        lowest = min(report.points, key=lambda pt: pt.linear_ratio)
        smallest = min(report.points, key=lambda pt: pt.epsilon)
        largest = max(report.points, key=lambda pt: pt.epsilon)
        growth_ci = _ratio_ci(report.quadratic_growth, [(smallest.probability, smallest.ci_radius),
                                                        (largest.probability, largest.ci_radius)])
        summary = dict(samples=params["samples"])
        records.append(self.record(ctx, "min_linear_ratio", report.min_linear_ratio, lowest.ci_radius / lowest.epsilon,
                                   epsilon=lowest.epsilon, **summary))
        records.append(self.record(ctx, "quadratic_growth", report.quadratic_growth, growth_ci, **summary))
        return records

    @experiment_schema(
        name="convolution-density",
        description="Log singularity of the 3-fold circle convolution and the five-term Fourier density bound",
        parameters=[
            param("radii", "float_list", default=[0.9, 0.95, 0.99, 2.9], positive=True, help="Annulus radii"),
            param("samples", "int", default=1_000_000, positive=True, help="Draws per check"),
            param("sectors", "int", default=4, positive=True, help="Angular sectors for the symmetry check"),
            param("b", "float_list", default=[1.0, 1.0, 1.0, 1.0, 1.0], positive=True, help="Five lower bounds on |a_k|"),
        ],
    )
    def convolution_density(self, ctx: RunContext, params: dict) -> list:
        if len(params["b"]) != 5:
            raise ConfigError(f"expected five values, got {len(params['b'])}", "b")
        records = []
        annuli = threefold_log_singularity(params["radii"], params["samples"], ctx.streams.child("threefold"),
                                           ctx.executor, sectors=params["sectors"])
        for annulus in annuli:
            echo = dict(radius=annulus.radius, half_width=annulus.half_width, samples=params["samples"])
            log_term = abs(math.log(abs(1.0 - annulus.radius)))
            records.append(self.record(ctx, "density", annulus.density, Z95 * annulus.std_error, **echo))
            records.append(self.record(ctx, "log_ratio", annulus.ratio, Z95 * annulus.std_error / log_term, **echo))
            high, low = int(np.argmax(annulus.sector_densities)), int(np.argmin(annulus.sector_densities))
            spread_ci = Z95 * math.hypot(annulus.sector_errors[high], annulus.sector_errors[low])
            records.append(self.record(ctx, "sector_spread", annulus.sector_densities[high] - annulus.sector_densities[low],
                                       spread_ci, **echo))

        bound = density_bound_five(params["b"])
        # coefficients a_k = b_k, the extreme case of |a_k| >= b_k
        hist = sampler_histogram(CircleSumSampler(np.asarray(bound.b)), params["samples"],
                                 ctx.streams.child("five-term"), ctx.executor)
        peak, error, _ = hist.max_density()
        echo = dict(b=",".join(f"{v:g}" for v in bound.b), samples=params["samples"])
        records.append(self.record(ctx, "phi", bound.phi, **echo))
        records.append(self.record(ctx, "five_term_max_density", peak, Z95 * error,
                                   bin_width=float(hist.widths[0]), **echo))
        records.append(self.record(ctx, "five_term_margin", bound.phi - peak, Z95 * error, **echo))
        return records
