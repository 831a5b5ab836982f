import numpy as np
import pytest
from scipy.stats import kstest

from levymalliavin import (DiscreteMeasure, LevyPath, LevyTriplet, SizeSet,
                           ZERO_MEASURE, count_jumps, evaluate_X,
                           path_from_json, path_to_json, restrict_jumps,
                           simulate_batch, simulate_path)
from levymalliavin.presets import make_measure

from conftest import manual_path


class TestSimulatePath:
    def test_zero_measure_gives_no_jumps(self):
        trip = LevyTriplet(0.0, 1.0, ZERO_MEASURE, 1.0)
        path = simulate_path(trip, 8, seed=0)
        assert path.n_jumps == 0

    def test_same_seed_identical(self, poisson_triplet):
        a = simulate_path(poisson_triplet, 16, seed=123)
        b = simulate_path(poisson_triplet, 16, seed=123)
        assert np.array_equal(a.brownian, b.brownian)
        assert np.array_equal(a.jump_times, b.jump_times)
        assert np.array_equal(a.jump_sizes, b.jump_sizes)

    def test_different_seeds_differ(self, poisson_triplet):
        a = simulate_path(poisson_triplet, 16, seed=1)
        b = simulate_path(poisson_triplet, 16, seed=2)
        assert not np.array_equal(a.brownian, b.brownian)

    def test_poisson_mean_over_seeds(self, poisson_triplet):
        counts = [simulate_path(poisson_triplet, 2, seed=s).n_jumps
                  for s in range(4000)]
        mean = np.mean(counts)
        stderr = np.std(counts) / np.sqrt(len(counts))
        assert abs(mean - 1.0) <= 3 * stderr + 1e-12

    def test_infinite_measure_requires_truncation(self):
        nu = make_measure("truncatable-gamma-like")
        trip = LevyTriplet(0.0, 0.0, nu, 1.0)
        with pytest.raises(ValueError, match="truncation"):
            simulate_path(trip, 8, seed=0)
        path = simulate_path(trip, 8, seed=0, truncation_eps=0.1)
        assert np.all(np.abs(path.jump_sizes) >= 0.1)

    def test_grid_size_validated(self, poisson_triplet):
        with pytest.raises(ValueError):
            simulate_path(poisson_triplet, 1, seed=0)


class TestDistributional:
    """Batch-level law checks: Poisson counts, uniform jump times."""

    def test_count_moments_and_time_law(self):
        nu = DiscreteMeasure(((1.0, 2.0),))   # rate T * 2
        trip = LevyTriplet(0.0, 0.0, nu, 1.5)
        batch = simulate_batch(trip, 2, 100_000, base_seed=7)
        lam = 1.5 * 2.0
        counts = batch.counts
        mean, var = counts.mean(), counts.var()
        se_mean = counts.std() / np.sqrt(counts.size)
        assert abs(mean - lam) <= 4 * se_mean
        # variance of the sample variance of Poisson: (m4 - var^2)/n
        m4 = np.mean((counts - mean) ** 4)
        se_var = np.sqrt((m4 - var ** 2) / counts.size)
        assert abs(var - lam) <= 4 * se_var
        # jump times uniform on (0, T]
        stat = kstest(batch.jump_times / trip.T, "uniform")
        assert stat.pvalue > 0.01

    def test_batch_path_extraction_is_valid(self, poisson_triplet):
        batch = simulate_batch(poisson_triplet, 8, 64, base_seed=3)
        for i in (0, 17, 63):
            path = batch.path(i)   # LevyPath invariants checked on build
            assert isinstance(path, LevyPath)


class TestRestrictAndCount:
    def test_superset_keeps_all(self, poisson_triplet, reals):
        path = simulate_path(poisson_triplet, 8, seed=11)
        same = restrict_jumps(path, reals)
        assert np.array_equal(same.jump_times, path.jump_times)

    def test_disjoint_empties(self, poisson_triplet):
        path = simulate_path(poisson_triplet, 8, seed=11)
        empty = restrict_jumps(path, SizeSet.abs_band(5.0, 6.0))
        assert empty.n_jumps == 0

    def test_brownian_unchanged(self, poisson_triplet):
        path = simulate_path(poisson_triplet, 8, seed=11)
        r = restrict_jumps(path, SizeSet.abs_band(5.0, 6.0))
        assert np.array_equal(r.brownian, path.brownian)

    def test_nested_bands_nest(self):
        nu = DiscreteMeasure(((0.3, 1.0), (0.8, 1.0), (2.5, 1.0)))
        trip = LevyTriplet(0.0, 0.0, nu, 1.0)
        for seed in range(10):
            path = simulate_path(trip, 4, seed=seed)
            inner = restrict_jumps(path, SizeSet.abs_band(0.5, 2.0))
            outer = restrict_jumps(path, SizeSet.abs_band(0.25, 3.0))
            assert set(inner.jump_times) <= set(outer.jump_times)
            assert count_jumps(path, SizeSet.abs_band(0.5, 2.0)) \
                <= count_jumps(path, SizeSet.abs_band(0.25, 3.0))

    def test_restrict_composes(self, poisson_triplet):
        nu = DiscreteMeasure(((0.3, 1.0), (0.8, 1.0), (2.5, 1.0)))
        trip = LevyTriplet(0.0, 0.0, nu, 1.0)
        path = simulate_path(trip, 4, seed=5)
        a, b = SizeSet.abs_band(0.5, 3.0), SizeSet.abs_band(0.25, 2.0)
        lhs = restrict_jumps(path, a.intersect(b))
        rhs = restrict_jumps(restrict_jumps(path, a), b)
        assert np.array_equal(lhs.jump_times, rhs.jump_times)
        assert lhs.triplet.nu == rhs.triplet.nu

    def test_count_trivial(self, poisson_triplet, reals):
        path = simulate_path(poisson_triplet, 8, seed=4)
        assert count_jumps(path) == path.n_jumps
        assert count_jumps(path, reals) == path.n_jumps
        empty = manual_path(poisson_triplet, [])
        assert count_jumps(empty, reals) == 0


class TestEvaluateX:
    def test_zero_at_origin(self, poisson_triplet):
        path = simulate_path(poisson_triplet, 8, seed=2)
        assert evaluate_X(path, 0.0) == 0.0

    def test_compensated_unit_jumps(self, poisson_triplet):
        # jumps of size 1 are compensated: X_t = N_t - t * nu({1})
        path = manual_path(poisson_triplet, [(0.3, 1.0), (0.7, 1.0)])
        assert evaluate_X(path, 0.5) == pytest.approx(1.0 - 0.5, abs=1e-12)

    def test_pure_drift(self):
        trip = LevyTriplet(2.0, 0.0, ZERO_MEASURE, 1.0)
        path = manual_path(trip, [])
        assert evaluate_X(path, 0.25) == pytest.approx(0.5, abs=1e-15)

    def test_large_jumps_uncompensated(self):
        nu = DiscreteMeasure(((2.0, 1.0),))
        trip = LevyTriplet(0.0, 0.0, nu, 1.0)
        path = manual_path(trip, [(0.4, 2.0)])
        assert evaluate_X(path, 0.5) == pytest.approx(2.0, abs=1e-12)

    def test_out_of_range_rejected(self, poisson_triplet):
        path = manual_path(poisson_triplet, [])
        with pytest.raises(ValueError):
            evaluate_X(path, 1.5)


class TestValidationAndSerialization:
    def test_unsorted_jumps_rejected(self, poisson_triplet):
        with pytest.raises(ValueError):
            LevyPath(poisson_triplet, np.array([0.0, 1.0]), np.zeros(2),
                     np.array([0.7, 0.3]), np.array([1.0, 1.0]), 0)

    def test_zero_size_rejected(self, poisson_triplet):
        with pytest.raises(ValueError):
            LevyPath(poisson_triplet, np.array([0.0, 1.0]), np.zeros(2),
                     np.array([0.3]), np.array([0.0]), 0)

    def test_brownian_must_start_at_zero(self, poisson_triplet):
        with pytest.raises(ValueError):
            LevyPath(poisson_triplet, np.array([0.0, 1.0]), np.ones(2),
                     np.empty(0), np.empty(0), 0)

    def test_json_round_trip(self, poisson_triplet):
        path = simulate_path(poisson_triplet, 8, seed=9)
        text = path_to_json(path)
        back = path_from_json(text, path.triplet)
        assert np.array_equal(back.grid, path.grid)
        assert np.array_equal(back.brownian, path.brownian)
        assert np.array_equal(back.jump_times, path.jump_times)
        assert np.array_equal(back.jump_sizes, path.jump_sizes)
        assert back.seed == path.seed

    def test_triplet_validation(self):
        with pytest.raises(ValueError):
            LevyTriplet(0.0, -1.0, ZERO_MEASURE, 1.0)
        with pytest.raises(ValueError):
            LevyTriplet(0.0, 0.0, ZERO_MEASURE, 0.0)
