import itertools
import math

import numpy as np
import pytest

from almrl import stats
from almrl.rng import SeedSpec, derive_stream


def brute_force_wilcoxon(a, b):
    """Oracle: literal enumeration of all sign assignments."""
    d = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
    d = d[d != 0.0]
    m = len(d)
    if m == 0:
        return 1.0
    from scipy.stats import rankdata

    ranks = rankdata(np.abs(d))
    w_obs = ranks[d > 0].sum()
    count = 0
    for signs in itertools.product((0, 1), repeat=m):
        w = sum(r for r, s in zip(ranks, signs) if s)
        if w >= w_obs - 1e-9:
            count += 1
    return count / 2**m


class TestMovingAverage:
    def test_window_one_identity(self):
        s = [3.0, 1.0, 4.0, 1.0]
        assert np.array_equal(stats.moving_average(s, 1), s)

    def test_hand_case(self):
        out = stats.moving_average([1, 2, 3, 4], 2)
        assert np.allclose(out, [1.0, 1.5, 2.5, 3.5])

    def test_constant_unchanged(self):
        out = stats.moving_average(np.full(50, 2.5), 7)
        assert np.allclose(out, 2.5)

    def test_length_preserved(self):
        assert len(stats.moving_average(np.arange(123), 200)) == 123

    def test_empty(self):
        assert len(stats.moving_average([], 5)) == 0

    def test_bad_window(self):
        with pytest.raises(ValueError):
            stats.moving_average([1.0], 0)


class TestQuantile:
    def test_hand_cases(self):
        assert stats.quantile([1, 2, 3, 4], 0.5) == 2.5
        assert stats.quantile([1, 2, 3, 4, 5], 0.25) == 2.0
        assert stats.quantile([7.0], 0.9) == 7.0

    def test_ordering(self):
        rng = derive_stream(SeedSpec(0))
        for _ in range(20):
            v = rng.standard_normal(17)
            assert stats.quantile(v, 0.25) <= stats.quantile(v, 0.75)

    def test_errors(self):
        with pytest.raises(ValueError):
            stats.quantile([], 0.5)
        with pytest.raises(ValueError):
            stats.quantile([1.0], 1.5)


class TestTerminalReward:
    def test_constant(self):
        value, truncated = stats.terminal_reward(np.full(600, -1.25))
        assert value == -1.25 and not truncated

    def test_arithmetic_series(self):
        value, truncated = stats.terminal_reward(np.arange(1, 1001, dtype=float))
        assert value == 750.5 and not truncated

    def test_truncation_flag(self):
        value, truncated = stats.terminal_reward(np.arange(100, dtype=float))
        assert value == 49.5 and truncated

    def test_empty(self):
        with pytest.raises(ValueError):
            stats.terminal_reward([])


class TestWilcoxon:
    def test_all_positive_hand_case(self):
        p = stats.wilcoxon_one_sided([1, 2, 3, 4, 5], [0, 0, 0, 0, 0])
        assert p == 1 / 32

    def test_mixed_hand_case(self):
        # d = [1, 2, 3, -4, 5]: W+ = 11, 7 of 32 assignments reach 11
        p = stats.wilcoxon_one_sided([1, 2, 3, -4, 5], [0, 0, 0, 0, 0])
        assert p == 7 / 32

    def test_identical_samples(self):
        assert stats.wilcoxon_one_sided([1.0, 2.0], [1.0, 2.0]) == 1.0

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            stats.wilcoxon_one_sided([1.0], [1.0, 2.0])

    def test_exact_agrees_with_enumeration(self):
        rng = derive_stream(SeedSpec(17))
        for _ in range(200):
            m = int(rng.integers(1, 13))
            a = np.round(rng.standard_normal(m), 1)
            b = np.round(rng.standard_normal(m), 1)
            assert stats.wilcoxon_one_sided(a, b) == pytest.approx(
                brute_force_wilcoxon(a, b), abs=0
            )

    def test_normal_approximation_close_at_switch_point(self):
        # compare the m = 20 exact path against the forced approximation
        rng = derive_stream(SeedSpec(23))
        for _ in range(100):
            a = rng.standard_normal(20)
            b = rng.standard_normal(20)
            exact = stats.wilcoxon_one_sided(a, b)
            old = stats.EXACT_MAX
            stats.EXACT_MAX = 0
            try:
                approx = stats.wilcoxon_one_sided(a, b)
            finally:
                stats.EXACT_MAX = old
            assert abs(exact - approx) < 0.01

    def test_antitone_in_shift(self):
        rng = derive_stream(SeedSpec(29))
        a = rng.standard_normal(15)
        b = rng.standard_normal(15)
        p0 = stats.wilcoxon_one_sided(a, b)
        p1 = stats.wilcoxon_one_sided(a + 0.5, b)
        assert p1 <= p0

    def test_strict_dominance_exact_tail(self):
        a = np.arange(1.0, 21.0)
        p = stats.wilcoxon_one_sided(a, np.zeros(20))
        assert p == pytest.approx(2.0**-20, abs=0)

    def test_large_sample_approximation_is_sane(self):
        rng = derive_stream(SeedSpec(31))
        a = rng.standard_normal(200) + 1.0
        b = rng.standard_normal(200)
        p = stats.wilcoxon_one_sided(a, b)
        assert 0.0 <= p < 1e-6
        assert stats.wilcoxon_one_sided(b, a) > 0.5


class TestPValueMatrix:
    def test_identical_methods(self):
        t = {"X": np.arange(5.0), "Y": np.arange(5.0)}
        m = stats.pvalue_matrix(t)
        assert np.all(m.p[~np.eye(2, dtype=bool)] == 1.0)
        assert np.all(np.diag(m.p) == 1.0)

    def test_asymmetry(self):
        t = {"X": np.arange(5.0) + 1.0, "Y": np.zeros(5)}
        m = stats.pvalue_matrix(t)
        i, j = m.methods.index("X"), m.methods.index("Y")
        assert m.p[i, j] == 1 / 32
        assert m.p[j, i] == 1.0

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            stats.pvalue_matrix({"X": np.zeros(5), "Y": np.zeros(6)})


class TestSummarizeCurves:
    def test_shapes_and_ordering(self):
        rng = derive_stream(SeedSpec(37))
        rewards = rng.standard_normal((6, 50))
        c = stats.summarize_curves("X", rewards)
        assert c.mean.shape == c.smoothed.shape == c.q25.shape == c.q75.shape == (50,)
        assert np.all(c.q25 <= c.q75)

    def test_mean_is_columnwise(self):
        rewards = np.array([[1.0, 2.0], [3.0, 4.0]])
        c = stats.summarize_curves("X", rewards)
        assert np.allclose(c.mean, [2.0, 3.0])

    def test_requires_matrix(self):
        with pytest.raises(ValueError):
            stats.summarize_curves("X", np.zeros(5))
