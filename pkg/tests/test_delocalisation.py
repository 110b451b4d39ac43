import itertools
import math

import numpy as np
import pytest

from deloclab.delocalisation import (CircleSumSampler, IIDFamilySampler, UnitCircleFamily, WeightVector, as_weights,
                                     circle_concentration, concentration_from_points, draw_points, is_in_S4,
                                     levy_concentration, sampler_histogram, sharpness_check, threefold_log_singularity,
                                     twofold_small_ball, uniform_cube_family, verify_bn_bound, verify_multidim_bound,
                                     verify_quadratic_bound, walk_max_density, weighted_circle_sum_sampler)
from deloclab.engine.trial_executor import TrialExecutor
from deloclab.errors import ConfigError, PreconditionError, ResolutionError, UnsupportedDimensionError
from deloclab.fourier_bessel import density_bound_five
from deloclab.histogram import DensityHistogram
from deloclab.streams import StreamFactory


def brute_force_s4(weights, epsilon0):
    squares = np.asarray(weights) ** 2
    if squares.size < 5:
        return False
    return all(squares[list(c)].sum() <= 1 - epsilon0 for c in itertools.combinations(range(squares.size), 4))


# --- Weights ---

def test_is_in_s4_matches_subset_enumeration(rng):
    for _ in range(200):
        n = int(rng.integers(5, 13))
        weights = WeightVector.random_unit(n, rng)
        epsilon0 = float(rng.uniform(0.01, 0.5))
        assert is_in_S4(weights, epsilon0) == brute_force_s4(weights.weights, epsilon0)


def test_s4_membership_examples():
    assert is_in_S4(WeightVector.flat(5), 0.1)
    assert not is_in_S4(WeightVector.flat(4), 0.1)
    assert not is_in_S4(WeightVector.basis(8), 0.1)
    assert not is_in_S4(np.full(4, 0.5), 0.1)
    with pytest.raises(PreconditionError):
        is_in_S4(WeightVector.flat(6), 1.0)


def test_weight_vectors_must_have_unit_norm():
    with pytest.raises(PreconditionError):
        WeightVector(np.array([1.0, 1.0]))
    with pytest.raises(PreconditionError):
        as_weights([0.5, 0.5])
    assert as_weights([0.6, 0.8]).n == 2
    assert WeightVector.normalized([3.0, 4.0]).weights.tolist() == pytest.approx([0.6, 0.8])


def test_random_s4_vectors(rng):
    weights = WeightVector.random_s4(8, 0.1, rng)
    assert is_in_S4(weights, 0.1)
    with pytest.raises(PreconditionError):
        WeightVector.random_s4(4, 0.1, rng)


def test_permutation_and_negation_keep_unit_norm():
    weights = WeightVector.normalized([3, 2, 1, 1, 1])
    assert weights.permuted([4, 3, 2, 1, 0]).weights[0] == pytest.approx(weights.weights[4])
    assert weights.negated([True, False, False, False, False]).weights[0] < 0


# --- Samplers ---

def test_draws_are_reproducible_across_workers(streams):
    sampler = weighted_circle_sum_sampler(WeightVector.flat(6))
    serial = draw_points(sampler, 5000, streams, TrialExecutor(workers=1, progress=False))
    parallel = draw_points(sampler, 5000, streams, TrialExecutor(workers=2, progress=False))
    np.testing.assert_array_equal(serial, parallel)
    assert serial.shape == (5000, 2)


def test_circle_sampler_support(streams, executor):
    sampler = CircleSumSampler(np.array([0.5, 0.3]))
    points = draw_points(sampler, 2000, streams, executor)
    assert np.max(np.hypot(points[:, 0], points[:, 1])) <= sampler.support_radius + 1e-12
    single = draw_points(CircleSumSampler.walk(1), 2000, streams, executor)
    np.testing.assert_allclose(np.hypot(single[:, 0], single[:, 1]), 1.0, atol=1e-12)


def test_family_constants_and_covariance(streams, executor):
    family = uniform_cube_family(2)
    assert family.density_bound == pytest.approx(1 / 12)
    assert family.moment_bound == pytest.approx(6 ** 1.5)
    points = draw_points(IIDFamilySampler(family, np.ones(1)), 100_000, streams, executor)
    np.testing.assert_allclose(np.cov(points.T), np.eye(2), atol=0.03)
    circle = UnitCircleFamily()
    assert circle.density_bound == math.inf
    np.testing.assert_allclose(circle.covariance, 0.5 * np.eye(2))


def test_twofold_small_ball_matches_draws(streams, executor):
    points = draw_points(weighted_circle_sum_sampler([math.sqrt(0.5), math.sqrt(0.5)]), 200_000, streams, executor)
    radii = np.hypot(points[:, 0], points[:, 1])
    for eps in (0.1, 0.5, 1.0):
        p = float(np.mean(radii <= eps))
        se = math.sqrt(p * (1 - p) / len(radii))
        assert abs(p - twofold_small_ball(eps)) <= 4 * se + 1e-9
    assert twofold_small_ball(2.0) == 1.0


# --- Concentration ---

def test_circle_concentration_closed_form():
    assert circle_concentration(0.5) == pytest.approx(1 / 6)
    assert circle_concentration(1.0) == 1.0
    assert circle_concentration(3.0) == 1.0
    assert circle_concentration(0.1) > 2 * math.asin(0.05) / math.pi
    with pytest.raises(PreconditionError):
        circle_concentration(0.0)


@pytest.mark.parametrize("eps", [0.05, 0.1, 0.2])
def test_single_circle_concentration_calibration(eps, streams, executor):
    estimate = levy_concentration(CircleSumSampler.walk(1), eps, 400_000, streams.child(f"{eps}"), executor)
    lower = 2 * math.asin(eps / 2) / math.pi
    upper = circle_concentration(eps)
    assert lower - 3 * estimate.ci_radius <= estimate.value <= upper + 3 * estimate.ci_radius
    # the best ball for one circle variable is centred near the circle
    assert abs(np.hypot(*estimate.argmax_shift) - math.sqrt(1 - eps ** 2)) <= eps


def test_concentration_is_monotone_in_epsilon(streams, executor):
    sampler = weighted_circle_sum_sampler(WeightVector.flat(5))
    points = draw_points(sampler, 200_000, streams, executor)
    small = concentration_from_points(points, 0.1, sampler.support_radius)
    large = concentration_from_points(points, 0.2, sampler.support_radius)
    assert small.value <= large.value + 3 * math.hypot(small.ci_radius, large.ci_radius)


def test_concentration_invariant_under_permutation_and_sign(streams, executor):
    weights = WeightVector.normalized([3, 2, 1, 1, 1])
    moved = weights.permuted([2, 4, 0, 1, 3]).negated([True, False, True, False, False])
    a = levy_concentration(weighted_circle_sum_sampler(weights), 0.2, 200_000, streams.child("a"), executor)
    b = levy_concentration(weighted_circle_sum_sampler(moved), 0.2, 200_000, streams.child("b"), executor)
    assert abs(a.value - b.value) <= 3 * math.hypot(a.ci_radius, b.ci_radius)


def test_concentration_preconditions(rng):
    points = rng.normal(size=(5000, 2))
    with pytest.raises(PreconditionError):
        concentration_from_points(points, 0.0)
    with pytest.raises(PreconditionError):
        concentration_from_points(points[:500], 0.1)
    with pytest.raises(ConfigError):
        concentration_from_points(points, 0.001, max_cells=1000)
    with pytest.raises(PreconditionError):
        levy_concentration(CircleSumSampler.walk(1), 0.1, 100)


def test_bn_ratio_is_one_for_a_single_variable(streams, executor):
    ratios = verify_bn_bound([1.0], [0.1, 0.2], 20_000, streams, executor)
    assert [r.ratio for r in ratios] == [1.0, 1.0]


def test_bn_bound_for_flat_weights(streams, executor):
    for item in verify_bn_bound(WeightVector.flat(8), [0.1, 0.2], 200_000, streams, executor):
        assert item.ratio <= 1.0
        assert item.sum_estimate.value > 0


def test_bn_ratio_for_fifty_flat_weights(streams, executor):
    ratios = verify_bn_bound(WeightVector.flat(50), [0.05, 0.1, 0.2], 200_000, streams, executor)
    assert [item.epsilon for item in ratios] == [0.05, 0.1, 0.2]
    assert max(item.ratio for item in ratios) <= 5


def test_quadratic_bound_for_flat_weights(streams, executor):
    grid = [0.05, 0.1, 0.2, 0.3]
    fits = [verify_quadratic_bound(WeightVector.flat(n), 0.1, grid, 200_000, streams.child(f"N={n}"), executor)
            for n in (5, 10)]
    ratios = [r for fit in fits for r in fit.ratios]
    assert max(ratios) / min(ratios) <= 10
    for fit in fits:
        assert fit.constant == max(fit.ratios)
        assert fit.epsilon in grid


def test_quadratic_bound_preconditions(streams, executor):
    with pytest.raises(PreconditionError):
        verify_quadratic_bound(WeightVector.basis(6), 0.1, [0.1], 10_000, streams, executor)
    with pytest.raises(PreconditionError):
        verify_quadratic_bound(WeightVector.flat(6), 0.1, [0.4], 10_000, streams, executor)
    with pytest.raises(ResolutionError):
        verify_quadratic_bound(WeightVector.flat(5), 0.1, [0.005, 0.3], 1000, streams, executor)


@pytest.mark.slow
def test_quadratic_bound_acceptance(executor):
    grid = [0.02, 0.05, 0.1, 0.2, 0.3]
    streams = StreamFactory(3, "quadratic")
    ratios = []
    for n in (5, 10, 50, 100):
        ratios += verify_quadratic_bound(WeightVector.flat(n), 0.1, grid, 1_000_000, streams.child(f"N={n}"), executor).ratios
    assert max(ratios) / min(ratios) <= 10


# --- Sharpness and convolution densities ---

def test_sharpness_small_ball_law(streams, executor):
    report = sharpness_check([0.01, 0.02, 0.05, 0.1, 0.2], 1_000_000, streams, executor)
    assert [pt.epsilon for pt in report.points] == [0.01, 0.02, 0.05, 0.1, 0.2]
    assert report.min_linear_ratio > 0
    # P(|S| <= eps) ~ eps^2 log(1/eps): the quadratic ratio grows as eps shrinks
    assert report.quadratic_growth > 1.3


def test_sharpness_accepts_large_epsilon(streams, executor):
    report = sharpness_check([2.0], 10_000, streams, executor)
    assert report.points[0].probability == 1.0


def test_sharpness_needs_a_hit_in_every_ball(streams, executor):
    with pytest.raises(ResolutionError):
        sharpness_check([1e-4, 0.2], 1000, streams, executor)


def test_threefold_density_grows_towards_unit_circle(streams, executor):
    near, nearer, nearest, edge = threefold_log_singularity([0.9, 0.95, 0.99, 2.9], 1_000_000, streams, executor,
                                                           sectors=4)
    assert nearer.density - near.density > 3 * math.hypot(near.std_error, nearer.std_error)
    assert nearest.density - nearer.density > 3 * math.hypot(nearer.std_error, nearest.std_error)
    ratios = [annulus.ratio for annulus in (near, nearer, nearest)]
    assert max(ratios) / min(ratios) <= 5
    for annulus in (near, nearer, nearest, edge):
        spread = annulus.sector_densities.max() - annulus.sector_densities.min()
        assert spread <= 5 * math.sqrt(2) * annulus.sector_errors.max()


def test_threefold_density_is_small_near_the_support_edge(streams, executor):
    nearest, edge = threefold_log_singularity([0.99, 2.9], 1_000_000, streams, executor)
    # radial density of |S| tends to sqrt(3) / (2 pi) at |S| = 3
    assert edge.density < 0.3 * nearest.density
    assert edge.density < 0.03


@pytest.mark.slow
def test_threefold_log_singularity_acceptance(executor):
    results = threefold_log_singularity([0.9, 0.95, 0.99], 10_000_000, StreamFactory(8, "threefold"), executor)
    ratios = [annulus.ratio for annulus in results]
    assert max(ratios) / min(ratios) <= 5


def test_threefold_checks(streams, executor):
    with pytest.raises(PreconditionError):
        threefold_log_singularity([1.0], 1000, streams, executor)
    with pytest.raises(PreconditionError):
        threefold_log_singularity([3.5], 1000, streams, executor)
    with pytest.raises(ResolutionError):
        threefold_log_singularity([0.9], 10_000, streams, executor)


def test_multidim_single_uniform_variable(streams, executor):
    report = verify_multidim_bound(uniform_cube_family(1), WeightVector.basis(1), 200_000, streams, executor)
    assert report.max_density == pytest.approx(report.density_bound, rel=0.1)


def test_multidim_flat_uniform_sum_is_gaussian(streams, executor):
    report = verify_multidim_bound(uniform_cube_family(1), WeightVector.flat(100), 200_000, streams, executor)
    assert report.max_density == pytest.approx(1 / math.sqrt(2 * math.pi), rel=0.05)


def test_multidim_planar_sum_below_three_k(streams, executor):
    report = verify_multidim_bound(uniform_cube_family(2), WeightVector.flat(64), 200_000, streams, executor)
    assert report.max_density <= 3 * report.density_bound
    assert report.ratio <= 3


def test_multidim_rejects_high_dimension(streams, executor):
    with pytest.raises(UnsupportedDimensionError):
        verify_multidim_bound(uniform_cube_family(4), WeightVector.flat(4), 1000, streams, executor)


def test_five_step_walk_below_phi(streams, executor):
    report = walk_max_density(5, 400_000, streams, executor)
    assert report.max_density <= density_bound_five([1, 1, 1, 1, 1]).phi


@pytest.mark.parametrize("scale", [0.1, 1.0, 10.0])
def test_adding_a_circle_term_keeps_the_density_bound(scale, rng):
    n = 200_000
    y = rng.uniform(-math.sqrt(3), math.sqrt(3), size=(n, 2))
    angles = 2 * np.pi * rng.random(n)
    points = y + scale * np.column_stack([np.cos(angles), np.sin(angles)])
    value, error, _ = DensityHistogram.covering(points).max_density()
    assert value <= 1 / 12 + 5 * error


@pytest.mark.parametrize("a, d", [(0.5, 1), (2.0, 1), (0.5, 2), (2.0, 2)])
def test_affine_map_rescales_the_density(a, d, streams, executor):
    sampler = IIDFamilySampler(uniform_cube_family(d), np.ones(1))
    x = draw_points(sampler, 100_000, streams.child("x"), executor)
    z = draw_points(sampler, 100_000, streams.child("z"), executor)
    shift = np.full(d, 0.3)
    bins, width = 8, 2 * math.sqrt(3) / 8
    base = DensityHistogram.from_points(x, np.full(d, -math.sqrt(3)), np.full(d, width), [bins] * d)
    mapped = DensityHistogram.from_points(a * z + shift, a * np.full(d, -math.sqrt(3)) + shift,
                                          np.full(d, a * width), [bins] * d)
    rescaled = mapped.density * a ** d
    errors = np.hypot(base.std_error, mapped.std_error * a ** d)
    assert np.max(np.abs(rescaled - base.density) / errors) <= 5


def test_sampler_histogram_counts_every_draw(streams, executor):
    hist = sampler_histogram(CircleSumSampler.walk(2), 50_000, streams, executor)
    assert hist.total == 50_000
    assert hist.integral() == pytest.approx(1.0, abs=0.01)
