import math

import numpy as np
import pytest

from deloclab.clt import (GaussianTarget, TriangularArraySpec, circle_array, covariance_sum, estimator_floor,
                          gaussian_density, lindeberg_bound, lindeberg_directions, lindeberg_estimate, lindeberg_sum,
                          mc_covariance, sample_row_sums, supnorm_from_points, supnorm_schedule, supnorm_to_gaussian,
                          uniform_array)
from deloclab.delocalisation import UnitCircleFamily, WeightVector
from deloclab.errors import DomainError, PreconditionError, ResolutionError, UnsupportedDimensionError
from deloclab.streams import StreamFactory

HALF_IDENTITY = GaussianTarget(0.5 * np.eye(2))


def circle_row(n):
    return circle_array(WeightVector.flat(n))


# --- Gaussian target ---

@pytest.mark.parametrize("covariance", [
    [[1.0, 0.0], [0.0, 0.0]],
    [[1.0, 0.5], [0.0, 1.0]],
    [[1.0, 2.0], [2.0, 1.0]],
    np.ones((2, 3)),
])
def test_gaussian_target_rejects_bad_covariances(covariance):
    with pytest.raises(DomainError):
        GaussianTarget(np.asarray(covariance))


def test_gaussian_target_properties():
    target = GaussianTarget(np.array([[2.0, 0.5], [0.5, 1.0]]))
    assert target.dimension == 2
    assert target.determinant == pytest.approx(1.75)
    assert target.entry_bound == 2.0
    np.testing.assert_allclose(target.std, [math.sqrt(2.0), 1.0])
    assert target.peak == pytest.approx(1 / (2 * math.pi * math.sqrt(1.75)))


def test_gaussian_density_values():
    assert gaussian_density(np.eye(1), 0.0) == pytest.approx(1 / math.sqrt(2 * math.pi))
    assert gaussian_density(HALF_IDENTITY, [0.0, 0.0]) == pytest.approx(1 / math.pi)
    assert gaussian_density(HALF_IDENTITY, [1.0, 0.0]) == pytest.approx(math.exp(-1) / math.pi)
    values = gaussian_density(HALF_IDENTITY, np.zeros((3, 4, 2)))
    assert values.shape == (3, 4)
    with pytest.raises(DomainError):
        gaussian_density(np.zeros((2, 2)), [0.0, 0.0])


# --- Hypotheses ---

def test_covariance_sums():
    np.testing.assert_allclose(covariance_sum(circle_row(8)), 0.5 * np.eye(2))
    np.testing.assert_allclose(covariance_sum(uniform_array(WeightVector.flat(10), d=2)), np.eye(2))
    assert circle_row(8).variances.sum() == pytest.approx(1.0)
    assert circle_row(16).max_weight == pytest.approx(0.25)


def test_array_rows_need_elements():
    with pytest.raises(PreconditionError):
        TriangularArraySpec(np.array([]), UnitCircleFamily())


def test_mc_covariance_matches_analytic(streams, executor):
    spec = circle_row(8)
    estimate, error = mc_covariance(spec, 100_000, streams, executor)
    assert np.all(np.abs(estimate - covariance_sum(spec)) <= 4 * error + 1e-12)


def test_lindeberg_directions():
    np.testing.assert_array_equal(lindeberg_directions(1), [[1.0], [-1.0]])
    directions = lindeberg_directions(2)
    assert directions.shape == (8, 2)
    np.testing.assert_allclose(np.linalg.norm(directions, axis=1), 1.0)
    with pytest.raises(UnsupportedDimensionError):
        lindeberg_directions(3)


def test_lindeberg_sum_matches_closed_form(streams, executor):
    # flat weights 1/4: the indicator is |cos t| > 0.4, so the sum is E[cos^2 t; |cos t| > 0.4]
    eps = 0.1
    estimate = lindeberg_estimate(circle_row(16), eps, [1.0, 0.0], 200_000, streams, executor)
    alpha = math.acos(0.4)
    exact = (alpha + math.sin(2 * alpha) / 2) / math.pi
    assert abs(estimate.value - exact) <= 4 * estimate.std_error
    assert estimate.value <= lindeberg_bound(1.0, 1.0, 1.0, eps, 0.25)


def test_lindeberg_sum_vanishes_for_long_rows(streams, executor):
    values = [lindeberg_sum(circle_row(n), 0.1, [0.0, 1.0], 50_000, streams, executor) for n in (4, 64, 1024)]
    assert values[0] > values[1]
    # |a_m| = 1/32 < eps, so no element exceeds the threshold
    assert values[2] == 0.0


def test_lindeberg_sum_of_uniform_rows_tracks_the_moment_bound(streams, executor):
    rows = [uniform_array(WeightVector.flat(n), d=1) for n in (4, 64, 1024)]
    values = [lindeberg_sum(row, 0.1, [1.0], 50_000, streams, executor) for row in rows]
    bounds = [lindeberg_bound(row.moment_bound, row.eta, 1.0, 0.1, row.max_weight) for row in rows]
    assert values[0] > values[1]
    # |a_m Y_m| <= sqrt(3) / 32 < eps
    assert values[2] == 0.0
    assert bounds == sorted(bounds, reverse=True)
    assert all(value <= bound for value, bound in zip(values, bounds))


def test_lindeberg_preconditions(streams, executor):
    with pytest.raises(PreconditionError):
        lindeberg_estimate(circle_row(4), 0.0, [1.0, 0.0], 100, streams, executor)
    with pytest.raises(PreconditionError):
        lindeberg_estimate(circle_row(4), 0.1, [1.0], 100, streams, executor)
    with pytest.raises(PreconditionError):
        lindeberg_bound(1.0, 1.0, 1.0, 0.0, 0.5)


def test_lindeberg_bound_value():
    assert lindeberg_bound(2.0, 1.0, 1.0, 0.1, 0.05) == pytest.approx(1.0)


# --- Sup-norm distance ---

def test_supnorm_decreases_from_short_rows(streams, executor):
    results = supnorm_schedule(circle_row, [8, 64], HALF_IDENTITY, 1_000_000, streams, executor, bins=16)
    (_, short), (_, long) = results
    assert short.distance > long.distance
    assert short.bins == 16
    assert short.samples == 1_000_000


def test_supnorm_of_gaussian_draws_sits_at_the_floor(rng):
    points = rng.normal(scale=math.sqrt(0.5), size=(1_000_000, 2))
    report = supnorm_from_points(points, HALF_IDENTITY, bins=16)
    assert report.distance <= 1.5 * estimator_floor(HALF_IDENTITY, 1_000_000, bins=16)


def test_supnorm_is_invariant_under_a_common_phase_rotation(streams, executor):
    points = sample_row_sums(circle_row(16), 1_000_000, streams, executor)
    theta = 0.7
    rotation = np.array([[math.cos(theta), -math.sin(theta)], [math.sin(theta), math.cos(theta)]])
    plain = supnorm_from_points(points, HALF_IDENTITY, bins=16)
    rotated = supnorm_from_points(points @ rotation.T, HALF_IDENTITY, bins=16)
    assert abs(plain.distance - rotated.distance) <= 3 * math.hypot(plain.std_error, rotated.std_error)


def test_estimator_floor_falls_with_samples():
    assert estimator_floor(HALF_IDENTITY, 10_000_000, bins=16) < estimator_floor(HALF_IDENTITY, 100_000, bins=16)
    assert estimator_floor(HALF_IDENTITY, 1_000_000) > 0


def test_supnorm_resolution_check(streams, executor):
    with pytest.raises(ResolutionError):
        supnorm_to_gaussian(circle_row(8), HALF_IDENTITY, 10_000, streams, executor, bins=40)


def test_supnorm_window_must_cover_four_sigmas(streams, executor):
    with pytest.raises(PreconditionError):
        supnorm_to_gaussian(circle_row(8), HALF_IDENTITY, 10_000, streams, executor, window=[1.0, 1.0])


def test_supnorm_dimension_checks(streams, executor):
    with pytest.raises(UnsupportedDimensionError):
        supnorm_to_gaussian(uniform_array(WeightVector.flat(4), d=3), GaussianTarget(np.eye(3)), 1000, streams, executor)
    with pytest.raises(PreconditionError):
        supnorm_to_gaussian(circle_row(4), GaussianTarget(np.eye(1)), 1000, streams, executor)


def test_row_sums_have_the_row_dimension(streams, executor):
    assert sample_row_sums(uniform_array(WeightVector.flat(5), d=1), 2000, streams, executor).shape == (2000, 1)
    assert sample_row_sums(circle_row(5), 2000, streams, executor).shape == (2000, 2)


@pytest.mark.slow
def test_supnorm_schedule_acceptance(executor):
    results = dict(supnorm_schedule(circle_row, [8, 64, 512], HALF_IDENTITY, 10_000_000,
                                    StreamFactory(5, "clt"), executor))
    assert results[8].distance > results[64].distance
    assert results[8].distance > results[512].distance
    assert results[512].distance <= 0.05
