from __future__ import annotations

import math
import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import levels_mp, sample_sizes_mp
from pmlmc.errors import DimensionMismatch, EmptyLevel, InsufficientLevels, InsufficientSamples, InvalidArgs, NonpositiveCost
from pmlmc.estimator import (
    EstimatorConfig,
    EstimatorState,
    LevelStats,
    adaptive_update,
    error_estimate,
    fit_decay,
    optimal_sample_sizes,
    required_levels,
    sample_variance,
    telescoping_estimate,
)


def state_of(levels, eps=0.1, M=None, **kw):
    L = len(levels) - 1
    cfg = EstimatorConfig(eps, max_levels=L if M is None else M, initial_levels=L,
                          initial_samples=[2] * (L + 1), **kw)
    return EstimatorState(cfg, L, tuple(levels))


class TestTelescoping:
    def test_single_level_mean(self):
        assert telescoping_estimate(state_of([LevelStats(0, 5, 10.0)])) == 2.0

    def test_two_levels(self):
        s = state_of([LevelStats(0, 5, 10.0), LevelStats(1, 2, -1.0)])
        assert telescoping_estimate(s) == 1.5

    def test_zero_sums(self):
        s = state_of([LevelStats(0, 3, 0.0), LevelStats(1, 4, 0.0)])
        assert telescoping_estimate(s) == 0.0

    def test_empty_level_raises(self):
        with pytest.raises(EmptyLevel):
            telescoping_estimate(state_of([LevelStats(0, 3, 1.0), LevelStats(1, 0)]))

    def test_plain_mc_when_single_level(self):
        ys = [0.3, 1.7, -0.2, 4.0]
        s = state_of([LevelStats.from_samples(0, ys)])
        assert telescoping_estimate(s) == pytest.approx(sum(ys) / len(ys), rel=1e-15)

    @given(st.lists(st.tuples(st.integers(1, 50), st.floats(-1e3, 1e3)), min_size=1, max_size=5))
    def test_linear_in_sums(self, data):
        a = state_of([LevelStats(l, n, y) for l, (n, y) in enumerate(data)])
        b = state_of([LevelStats(l, n, 2 * y) for l, (n, y) in enumerate(data)])
        assert telescoping_estimate(b) == pytest.approx(2 * telescoping_estimate(a), rel=1e-12, abs=1e-12)


class TestSampleVariance:
    def test_constant_samples(self):
        assert sample_variance(LevelStats(0, 3, 3.0, 3.0)) == 0.0

    def test_two_samples(self):
        assert sample_variance(LevelStats(0, 2, 2.0, 4.0)) == 1.0

    def test_one_over_n_normalisation(self):
        assert sample_variance(LevelStats.from_samples(0, [1, 2, 3])) == pytest.approx(2 / 3, rel=1e-15)

    def test_needs_two(self):
        with pytest.raises(InsufficientSamples):
            sample_variance(LevelStats(0, 1, 1.0, 1.0))

    @given(st.lists(st.floats(-1e6, 1e6), min_size=2, max_size=40))
    def test_nonnegative(self, ys):
        assert sample_variance(LevelStats.from_samples(0, ys)) >= 0.0

    @given(st.floats(-1e6, 1e6), st.integers(2, 50))
    def test_zero_iff_constant(self, y, n):
        assert sample_variance(LevelStats.from_samples(0, [y] * n)) == 0.0


class TestRequiredLevels:
    def test_log_argument_one(self):
        assert required_levels(1, 1, 2, math.sqrt(2)) == 0

    def test_three_levels(self):
        assert required_levels(1, 1, 2, math.sqrt(2) / 8) == 3

    def test_half_rate(self):
        assert required_levels(2, 2, 2, math.sqrt(2)) == 1

    def test_clamps_at_zero(self):
        assert required_levels(1e-3, 1, 2, 1.0) == 0

    def test_invalid(self):
        with pytest.raises(InvalidArgs):
            required_levels(1, 1, 1, 0.1)

    @given(st.floats(1e-3, 1e3), st.floats(0.05, 4), st.floats(1.1, 8), st.floats(1e-6, 1))
    def test_matches_high_precision(self, c, alpha, s, eps):
        assert required_levels(c, alpha, s, eps) == levels_mp(c, alpha, s, eps)

    @given(st.floats(1e-2, 1e2), st.floats(0.1, 3), st.floats(1e-6, 1), st.floats(1.0, 100))
    def test_monotone_in_eps(self, c, alpha, eps, k):
        assert required_levels(c, alpha, 2, eps / k) >= required_levels(c, alpha, 2, eps)


class TestOptimalSampleSizes:
    def test_single_level(self):
        assert optimal_sample_sizes([1], [1], 1) == [2]

    def test_two_levels(self):
        assert optimal_sample_sizes([1, 1], [1, 4], 1) == [6, 3]

    def test_zero_variance_floored(self):
        assert optimal_sample_sizes([0, 1], [1, 1], 1) == [1, 2]

    def test_errors(self):
        with pytest.raises(DimensionMismatch):
            optimal_sample_sizes([1, 2], [1], 1)
        with pytest.raises(NonpositiveCost):
            optimal_sample_sizes([1], [0], 1)

    def test_matches_independent_evaluation(self):
        rng = random.Random(2024)
        for _ in range(100):
            L = rng.randint(0, 5)
            V = [10 ** rng.uniform(-8, 1) for _ in range(L + 1)]
            C = [10 ** rng.uniform(-4, 2) for _ in range(L + 1)]
            eps = 10 ** rng.uniform(-4, -1)
            assert optimal_sample_sizes(V, C, eps) == sample_sizes_mp(V, C, eps)

    @given(st.lists(st.tuples(st.floats(1e-6, 10), st.floats(1e-3, 10)), min_size=1, max_size=5),
           st.floats(1e-3, 1), st.integers(2, 5))
    def test_eps_scaling(self, vc, eps, k):
        V, C = zip(*vc)
        total = math.fsum(math.sqrt(v * c) for v, c in vc)
        for v, c in vc:
            pre = 2 / eps**2 * math.sqrt(v / c) * total
            pre_k = 2 / (eps / k) ** 2 * math.sqrt(v / c) * total
            assert pre_k == pytest.approx(k * k * pre, rel=1e-12)
        big, small = optimal_sample_sizes(V, C, eps / k), optimal_sample_sizes(V, C, eps)
        assert all(b >= s for b, s in zip(big, small))


class TestFitDecay:
    def test_exact_log_linear(self):
        c, a = fit_decay([5.0, 4.0, 2.0, 1.0], 2)
        assert c == pytest.approx(8, rel=1e-9) and a == pytest.approx(1, rel=1e-9)

    def test_constant_means_clamp(self):
        assert fit_decay([1.0, 0.5, 0.5, 0.5], 2)[1] == 1e-3

    def test_single_level(self):
        with pytest.raises(InsufficientLevels):
            fit_decay([1.0, 0.5], 2)

    @given(st.floats(1e-3, 1e3), st.floats(0.01, 4), st.floats(1.2, 6), st.integers(3, 7))
    def test_recovers_parameters(self, c, alpha, s, L):
        means = [1.0] + [c * s ** (-alpha * l) for l in range(1, L + 1)]
        cf, af = fit_decay(means, s)
        assert cf == pytest.approx(c, rel=1e-9) and af == pytest.approx(alpha, rel=1e-9)


class TestAdaptiveUpdate:
    def _state(self, eps, n=1000, M=6):
        # |Y_l| = 2^-l exactly with variance 2^-2l / 100, costs 2^l
        levels = []
        for l in range(3):
            m = 1.0 if l == 0 else 2.0**-l
            v = 4.0**-l / 100
            levels.append(LevelStats(l, n, n * m, n * (v + m * m), n * 2.0**l))
        return state_of(levels, eps=eps, M=M)

    def test_fixed_point_converges(self):
        st_ = self._state(eps=0.5, n=10**6)
        upd = adaptive_update(st_)
        assert upd.converged
        assert all(n <= 10**6 for n in upd.new_N)

    def test_halving_eps_grows_levels(self):
        a = adaptive_update(self._state(eps=1e-2))
        b = adaptive_update(self._state(eps=5e-3))
        assert a.required_L == required_levels(a.decay_c, a.decay_alpha, 2, 1e-2)
        assert b.required_L == required_levels(b.decay_c, b.decay_alpha, 2, 5e-3)
        assert b.new_L >= a.new_L and b.new_L > 2

    def test_new_levels_extrapolated(self):
        upd = adaptive_update(self._state(eps=1e-3))
        assert len(upd.new_N) == upd.new_L + 1
        assert all(n >= 2 for n in upd.new_N)

    def test_deterministic_model(self):
        levels = [LevelStats(0, 10, 10.0, 10.0, 10.0), LevelStats(1, 10, 1e-9, 1e-19, 20.0),
                  LevelStats(2, 10, 1e-10, 1e-21, 40.0)]
        upd = adaptive_update(state_of(levels, eps=1e-3))
        assert upd.converged

    def test_safety_factor(self):
        s = self._state(eps=1e-2, M=2)
        upd = adaptive_update(s)
        V = [sample_variance(x) for x in s.active]
        C = [x.mean_cost for x in s.active]
        raw = optimal_sample_sizes(V, C, 1e-2)
        assert upd.new_N == [max(2, math.ceil(1.3 * n)) for n in raw]

    def test_needs_two_samples(self):
        with pytest.raises(InsufficientSamples):
            adaptive_update(state_of([LevelStats(0, 1, 1.0, 1.0, 1.0)]))

    def test_error_estimate_split(self):
        s = self._state(eps=1e-2)
        err = error_estimate(s)
        stat = sum(sample_variance(x) / x.count for x in s.active)
        assert err.statistical == pytest.approx(stat)
        assert err.bias == pytest.approx(0.25 / (2**1 - 1), rel=1e-9)


class TestConfig:
    def test_invalid(self):
        with pytest.raises(InvalidArgs):
            EstimatorConfig(0.0)
        with pytest.raises(InvalidArgs):
            EstimatorConfig(0.1, max_levels=1, initial_levels=2, initial_samples=[2, 2, 2])
        with pytest.raises(InvalidArgs):
            EstimatorConfig(0.1, max_levels=1, initial_levels=1, initial_samples=[2, 1])

    def test_state_pads_levels(self):
        cfg = EstimatorConfig(0.1, max_levels=3, initial_levels=1, initial_samples=[2, 2])
        s = EstimatorState(cfg, 1, (LevelStats(0, 2, 1.0, 1.0),))
        assert len(s.per_level) == 4 and [x.level for x in s.per_level] == [0, 1, 2, 3]
        with pytest.raises(InvalidArgs):
            EstimatorState(cfg, 4)
