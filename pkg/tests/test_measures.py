import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from levymalliavin import (DensityMeasure, DiscreteMeasure, Interval, SizeSet,
                           TruncatableMeasure)
from levymalliavin.measures import table_inverse_cdf
from levymalliavin.presets import make_measure


class TestSizeSet:
    def test_interval_straddling_zero_rejected(self):
        with pytest.raises(ValueError):
            SizeSet((Interval(-1.0, 1.0),))
        with pytest.raises(ValueError):
            SizeSet((Interval(0.0, 1.0, closed_lo=True),))

    def test_contains(self):
        s = SizeSet.abs_band(0.5, 2.0)
        assert list(s.contains(np.array([0.7, -0.7, 0.4, 2.0, -1.9]))) == \
            [True, True, False, False, True]

    def test_zero_flag(self):
        assert SizeSet.zero_only().contains(np.array([0.0]))[0]
        assert not SizeSet.reals().contains(np.array([0.0]))[0]

    def test_singleton(self):
        s = SizeSet.singleton(-2.0)
        assert s.contains(np.array([-2.0]))[0]
        assert not s.contains(np.array([2.0]))[0]

    def test_intersect(self):
        a = SizeSet.abs_band(0.5, 3.0)
        b = SizeSet.abs_band(1.0, 2.0)
        c = a.intersect(b)
        assert c.contains(np.array([1.5]))[0]
        assert not c.contains(np.array([0.7]))[0]
        assert not c.contains(np.array([2.5]))[0]


class TestDiscreteMeasure:
    def test_atom_at_zero_rejected(self):
        with pytest.raises(ValueError):
            DiscreteMeasure(((0.0, 1.0),))

    def test_negative_mass_rejected(self):
        with pytest.raises(ValueError):
            DiscreteMeasure(((1.0, -1.0),))

    def test_integrate_exact(self):
        nu = DiscreteMeasure(((1.0, 2.0), (-2.0, 0.5)))
        assert nu.total_mass == 2.5
        assert nu.integrate(lambda x: x) == 2.0 * 1.0 + 0.5 * (-2.0)
        assert nu.integrate(lambda x: x * x) == 2.0 + 0.5 * 4.0

    def test_restrict_composes(self):
        nu = DiscreteMeasure(((0.6, 1.0), (1.2, 2.0), (-1.5, 0.5)))
        a = SizeSet.abs_band(0.5, 1.4)
        b = SizeSet.abs_band(1.0, 2.0)
        assert nu.restrict(a.intersect(b)) == nu.restrict(a).restrict(b)

    def test_sample_distribution(self):
        nu = DiscreteMeasure(((1.0, 3.0), (-2.0, 1.0)))
        rng = np.random.default_rng(0)
        xs = nu.sample(rng, 40_000)
        assert set(np.unique(xs)) == {1.0, -2.0}
        frac = np.mean(xs == 1.0)
        assert abs(frac - 0.75) < 4 * np.sqrt(0.75 * 0.25 / 40_000)


class TestDensityMeasure:
    def test_moments_checked_at_construction(self):
        with pytest.raises((ValueError, ArithmeticError)):
            DensityMeasure(lambda x: x ** -3.0, (Interval(0.0, 1.0),))

    def test_support_must_avoid_zero(self):
        with pytest.raises(ValueError):
            DensityMeasure(lambda x: np.ones_like(x), (Interval(-1.0, 1.0),))

    def test_total_mass_and_integrals(self):
        nu = make_measure("finite-density", lo=0.3, hi=3.0)
        expect = np.exp(-0.3) - np.exp(-3.0)
        assert abs(nu.total_mass - expect) < 1e-10
        # quadrature nodes agree with adaptive integration
        x, w = nu.nodes_weights()
        assert abs(np.dot(w, x) - nu.integrate(lambda x: x)) < 1e-9

    def test_sampler_matches_density(self):
        nu = make_measure("finite-density")
        rng = np.random.default_rng(1)
        xs = nu.sample(rng, 60_000)
        assert xs.min() >= 0.3 and xs.max() <= 3.0
        mean_exact = nu.integrate(lambda x: x) / nu.total_mass
        assert abs(xs.mean() - mean_exact) < 4 * xs.std() / np.sqrt(xs.size)

    def test_restricted_measure_cannot_sample(self):
        nu = make_measure("finite-density").restrict(SizeSet.abs_band(0.5, 1.0))
        with pytest.raises(ValueError):
            nu.sample(np.random.default_rng(0), 10)


class TestTruncatableMeasure:
    def test_infinite_mass(self):
        nu = make_measure("truncatable-gamma-like")
        assert nu.total_mass == float("inf")

    @settings(max_examples=20, deadline=None)
    @given(st.floats(min_value=0.01, max_value=0.5),
           st.floats(min_value=1.01, max_value=4.0))
    def test_truncated_mass_nonincreasing(self, eps, factor):
        nu = make_measure("truncatable-gamma-like")
        assert nu.truncated(eps).total_mass >= nu.truncated(eps * factor).total_mass

    def test_truncated_mass_closed_form(self):
        from scipy.special import exp1
        nu = make_measure("truncatable-gamma-like")
        assert abs(nu.truncated(0.1).total_mass - exp1(0.1)) < 1e-7

    def test_full_integrals(self):
        nu = make_measure("truncatable-gamma-like")
        # int y * y^{-1} e^{-y} dy = 1, int y^2 * y^{-1} e^{-y} dy = 1
        assert abs(nu.integrate_full(lambda y: np.abs(y)) - 1.0) < 1e-8
        assert abs(nu.integrate_full(lambda y: y * y) - 1.0) < 1e-8

    def test_requires_positive_eps(self):
        nu = make_measure("truncatable-gamma-like")
        with pytest.raises(ValueError):
            nu.truncated(0.0)

    def test_truncated_sampler_stays_truncated(self):
        nu = make_measure("truncatable-gamma-like")
        fin = nu.truncated(0.2)
        xs = fin.sample(np.random.default_rng(2), 5000)
        assert xs.min() >= 0.2


def test_table_inverse_cdf_reproduces_uniform():
    inv = table_inverse_cdf(lambda x: np.ones_like(x), 1.0, 3.0)
    u = np.linspace(0.0, 1.0, 11)
    assert np.allclose(inv(u), 1.0 + 2.0 * u, atol=1e-9)
