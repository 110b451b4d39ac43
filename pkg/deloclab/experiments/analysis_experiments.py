# deloclab/experiments/analysis_experiments.py

import logging
import math

import numpy as np

from deloclab.clt import (GaussianTarget, circle_array, covariance_sum, estimator_floor, lindeberg_bound,
                          lindeberg_directions, lindeberg_estimate, mc_covariance, supnorm_to_gaussian, uniform_array)
from deloclab.delocalisation import WeightVector
from deloclab.engine.experiment import Experiment, RunContext, experiment_schema, param
from deloclab.errors import ConfigError
from deloclab.fourier_bessel import bessel_j0, bessel_lp_tail, density_bound_five, envelope_constant
from deloclab.settings import Z95

DEFAULT_RADII = [0.0, 0.5, 1.0, 2.0, 2.404825557695773, 5.0, 10.0, 100.0, 1000.0, 10000.0]


class AnalysisExperiments(Experiment):
    """Deterministic Bessel quantities and the local CLT check for triangular arrays."""

    @experiment_schema(
        name="bessel",
        description="J0 on a grid of r, its envelope min(1, K / sqrt r), the L^5 tail and phi(b)",
        parameters=[
            param("r", "float_list", default=DEFAULT_RADII, minimum=0.0, help="Arguments of J0"),
            param("r_max", "float", default=1e4, minimum=100.0, help="Search range for K"),
            param("R", "float_list", default=[100.0, 1000.0, 10000.0], positive=True, help="Inner radii of the L^p tail rings"),
            param("p", "float", default=5.0, positive=True, help="Exponent of the tail integral"),
            param("b", "float_list", default=[1.0, 1.0, 1.0, 1.0, 1.0], positive=True, help="Five lower bounds for phi"),
        ],
    )
    def bessel(self, ctx: RunContext, params: dict) -> list:
        if len(params["b"]) != 5:
            raise ConfigError(f"expected five values, got {len(params['b'])}", "b")
        envelope = envelope_constant(params["r_max"])
        k = envelope.constant
        records = []
        for r in params["r"]:
            value = bessel_j0(r)
            bound = 1.0 if r == 0 else min(1.0, k / math.sqrt(r))
            records.append(self.record(ctx, "j0", value, r=r))
            records.append(self.record(ctx, "envelope", bound, r=r))

        records.append(self.record(ctx, "K", k, r_max=envelope.r_max))
        records.append(self.record(ctx, "grid_max", envelope.grid_max, r_max=envelope.r_max, argmax=envelope.argmax))
        for radius in params["R"]:
            tail = bessel_lp_tail(params["p"], radius)
            records.append(self.record(ctx, "lp_tail", tail, p=params["p"], R=radius))
            records.append(self.record(ctx, "lp_tail_scaled", tail * math.sqrt(radius), p=params["p"], R=radius))

        bound = density_bound_five(params["b"], k)
        records.append(self.record(ctx, "phi", bound.phi, b=",".join(f"{v:g}" for v in bound.b)))
        return records

    @experiment_schema(
        name="clt",
        description="Sup-norm distance between the row-sum density and its Gaussian limit along a schedule of n",
        parameters=[
            param("n", "int_list", default=[8, 64, 512], positive=True, help="Row lengths"),
            param("samples", "int", default=1_000_000, minimum=1000, help="Draws per row"),
            param("family", "str", default="circle", choices=("circle", "uniform"), help="Law of the elements"),
            param("d", "int", default=1, positive=True, help="Dimension of the uniform family"),
            param("eps", "float", default=0.1, positive=True, help="Lindeberg truncation level"),
            param("bins", "int", minimum=4, help="Bins per axis (default samples^(1/(d+2)))"),
        ],
    )
    def clt(self, ctx: RunContext, params: dict) -> list:
        if params["family"] == "circle":
            def row_for(n):
                return circle_array(WeightVector.flat(n))
        else:
            def row_for(n):
                return uniform_array(WeightVector.flat(n), params["d"])

        # flat weights give the same limit covariance for every n
        target = GaussianTarget(covariance_sum(row_for(params["n"][0])))
        samples, eps = params["samples"], params["eps"]
        floor = estimator_floor(target, samples, bins=params.get("bins"))
        logging.info(f"clt: family={params['family']} n={params['n']} samples={samples} floor={floor:.4g}")

        records = []
        for n in params["n"]:
            spec = row_for(n)
            streams = ctx.streams.child(f"n={n}")
            echo = dict(family=params["family"], n=n, samples=samples)

            report = supnorm_to_gaussian(spec, target, samples, streams.child("supnorm"), ctx.executor, bins=params.get("bins"))
            records.append(self.record(ctx, "supnorm", report.distance, Z95 * report.std_error,
                                       bins=report.bins, bin_width=report.bin_width, **echo))
            records.append(self.record(ctx, "estimator_floor", floor, bins=report.bins, **echo))

            covariance, errors = mc_covariance(spec, samples, streams.child("covariance"), ctx.executor)
            gaps = np.abs(covariance - target.covariance)
            worst = np.unravel_index(int(np.argmax(gaps)), gaps.shape)
            records.append(self.record(ctx, "covariance_error", gaps[worst], Z95 * errors[worst], **echo))

            estimates = [lindeberg_estimate(spec, eps, theta, samples, streams.child(f"lindeberg-{i}"), ctx.executor)
                         for i, theta in enumerate(lindeberg_directions(spec.dimension))]
            worst_direction = max(estimates, key=lambda e: e.value)
            records.append(self.record(ctx, "lindeberg_max", worst_direction.value, worst_direction.ci_radius, epsilon=eps, **echo))
            records.append(self.record(ctx, "lindeberg_bound",
                                       lindeberg_bound(spec.moment_bound, spec.eta, 1.0, eps, spec.max_weight),
                                       epsilon=eps, **echo))
        return records
