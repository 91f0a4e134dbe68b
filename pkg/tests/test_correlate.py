import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from foodsec.aggregate import SectorMatrix
from foodsec.correlate import (
    correlation_matrix,
    fisher_ci,
    pearson,
    pearson_p,
    read_correlations,
    read_null_summary,
    shuffle_null,
    write_correlations,
    write_heatmap_data,
    write_null_summary,
)


def pearson_textbook(x, y):
    """Definition evaluated directly with exact (fsum) accumulation."""
    n = len(x)
    mx = math.fsum(x) / n
    my = math.fsum(y) / n
    num = math.fsum((a - mx) * (b - my) for a, b in zip(x, y))
    dx = math.fsum((a - mx) ** 2 for a in x)
    dy = math.fsum((b - my) ** 2 for b in y)
    return num / math.sqrt(dx * dy)


def t_density(t, df):
    c = math.gamma((df + 1) / 2) / (math.sqrt(df * math.pi) * math.gamma(df / 2))
    return c * (1 + t * t / df) ** (-(df + 1) / 2)


def p_value_by_quadrature(r, n):
    """Two-sided p by numerically integrating the t density's tail."""
    df = n - 2
    t = r * math.sqrt(df / (1 - r * r))
    tail, _ = quad(t_density, abs(t), math.inf, args=(df,))
    return 2 * tail


class TestPearson:
    def test_exact_positive_linear(self):
        assert pearson([1, 2, 3], [2, 4, 6]) == pytest.approx(1.0)

    def test_exact_negative_linear(self):
        assert pearson([1, 2, 3], [3, 2, 1]) == pytest.approx(-1.0)

    def test_hand_evaluated(self):
        # cov*n = 4 and both centered sums of squares are 5, so r = 4/5.
        assert pearson([1, 2, 3, 4], [1, 3, 2, 4]) == pytest.approx(0.8, abs=1e-12)

    def test_zero_variance_is_undefined(self):
        assert pearson([1, 1, 1], [1, 2, 3]) is None
        assert pearson([1, 2, 3], [5, 5, 5]) is None

    def test_too_short_rejected(self):
        with pytest.raises(ValueError):
            pearson([1], [2])

    def test_matches_textbook_definition(self):
        rng = np.random.default_rng(42)
        for _ in range(200):
            n = int(rng.integers(5, 80))
            x = rng.normal(size=n) * rng.uniform(0.1, 100)
            y = rng.normal(size=n) + rng.uniform(-1, 1) * x
            r = pearson(x, y)
            assert math.isclose(r, pearson_textbook(x, y), rel_tol=1e-12, abs_tol=1e-12)

    @settings(max_examples=40, deadline=None)
    @given(
        st.lists(st.floats(-100, 100), min_size=3, max_size=30).filter(
            lambda v: max(v) - min(v) > 1e-3
        ),
        st.floats(0.1, 50),
        st.floats(-100, 100),
    )
    def test_positive_affine_invariance(self, x, a, b):
        rng = np.random.default_rng(7)
        y = rng.normal(size=len(x))
        base = pearson(x, y)
        scaled = pearson([a * v + b for v in x], y)
        assert scaled == pytest.approx(base, abs=1e-12)
        flipped = pearson([-a * v + b for v in x], y)
        assert flipped == pytest.approx(-base, abs=1e-12)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_symmetry(self, seed):
        rng = np.random.default_rng(seed)
        x = rng.normal(size=12)
        y = rng.normal(size=12)
        assert pearson(x, y) == pytest.approx(pearson(y, x), abs=1e-15)


class TestPearsonP:
    def test_zero_r_is_one(self):
        assert pearson_p(0.0, 10) == pytest.approx(1.0)
        assert pearson_p(0.0, 1000) == pytest.approx(1.0)

    def test_perfect_r_is_zero(self):
        assert pearson_p(1.0, 10) == 0.0
        assert pearson_p(-1.0, 10) == 0.0

    def test_small_n_undefined(self):
        assert pearson_p(0.5, 2) is None

    def test_against_quadrature(self):
        # r=0.5, n=30: t = 3.055 on 28 df, two-sided p ~ 0.0049.
        assert pearson_p(0.5, 30) == pytest.approx(0.0049, abs=2e-4)
        for r, n in [(0.1, 10), (0.3, 25), (0.7, 50), (0.9, 12), (-0.45, 40)]:
            assert pearson_p(r, n) == pytest.approx(p_value_by_quadrature(r, n), abs=2e-4)

    @settings(max_examples=50, deadline=None)
    @given(st.floats(0.05, 0.9), st.floats(0.05, 0.9), st.integers(5, 200))
    def test_monotone_in_abs_r(self, r1, r2, n):
        lo, hi = sorted((r1, r2))
        assert pearson_p(hi, n) <= pearson_p(lo, n) + 1e-15

    @settings(max_examples=50, deadline=None)
    @given(st.floats(0.1, 0.9), st.integers(5, 100), st.integers(5, 100))
    def test_monotone_in_n(self, r, n1, n2):
        lo, hi = sorted((n1, n2))
        assert pearson_p(r, hi) <= pearson_p(r, lo) + 1e-15


class TestFisherCi:
    def test_zero_r_large_n(self):
        lo, hi = fisher_ci(0.0, 403)
        assert lo == pytest.approx(-0.0975, abs=1e-3)
        assert hi == pytest.approx(0.0975, abs=1e-3)

    def test_bounds_stay_inside_unit_interval(self):
        lo, hi = fisher_ci(0.999, 10)
        assert -1.0 <= lo <= hi <= 1.0
        assert fisher_ci(1.0, 10) == (1.0, 1.0)

    def test_against_formula_at_082(self):
        lo, hi = fisher_ci(0.82, 400)
        assert lo == pytest.approx(0.785, abs=0.005)
        assert hi == pytest.approx(0.850, abs=0.005)

    def test_small_n_undefined(self):
        assert fisher_ci(0.5, 3) is None

    def test_bad_level_rejected(self):
        with pytest.raises(ValueError):
            fisher_ci(0.5, 30, level=1.5)

    @settings(max_examples=60, deadline=None)
    @given(st.floats(-0.95, 0.95), st.integers(5, 500))
    def test_contains_r(self, r, n):
        lo, hi = fisher_ci(r, n)
        assert lo <= r <= hi

    @settings(max_examples=60, deadline=None)
    @given(st.floats(-0.9, 0.9), st.integers(5, 200), st.integers(5, 200))
    def test_width_strictly_decreases_in_n(self, r, n1, n2):
        lo_n, hi_n = sorted((n1, n2))
        if lo_n == hi_n:
            return
        w1 = np.diff(fisher_ci(r, lo_n))[0]
        w2 = np.diff(fisher_ci(r, hi_n))[0]
        assert w2 < w1


def matrix(sectors, columns, values, counts=None):
    values = np.asarray(values, dtype=float)
    if counts is None:
        counts = np.full(len(sectors), 10)
    return SectorMatrix(sectors=sectors, columns=columns, values=values, counts=np.asarray(counts))


class TestCorrelationMatrix:
    def test_injected_duplicate_column_gives_unit_r(self):
        rng = np.random.default_rng(3)
        col = rng.normal(size=8)
        other = rng.normal(size=8)
        sectors = [f"s{i}" for i in range(8)]
        mobile = matrix(sectors, ["m1"], col[:, None])
        survey = matrix(sectors, ["dupe", "noise"], np.column_stack([col, other]))
        entries = {(e.mobile_var, e.survey_var): e for e in correlation_matrix(mobile, survey)}
        assert entries[("m1", "dupe")].r == pytest.approx(1.0)
        assert entries[("m1", "dupe")].p == 0.0

    def test_disjoint_sectors_all_undefined(self):
        mobile = matrix(["s1", "s2", "s3"], ["m"], [[1.0], [2.0], [3.0]])
        survey = matrix(["x1", "x2", "x3"], ["v"], [[1.0], [2.0], [3.0]])
        entries = correlation_matrix(mobile, survey)
        assert all(not e.defined for e in entries)
        assert all(e.n == 0 for e in entries)

    def test_pairwise_deletion_records_per_pair_n(self):
        sectors = [f"s{i}" for i in range(6)]
        x = np.arange(6.0)
        survey_values = np.column_stack([np.arange(6.0) * 2, np.arange(6.0) ** 2])
        survey_values[4, 0] = np.nan
        mobile = matrix(sectors, ["m"], x[:, None])
        survey = matrix(sectors, ["lin", "quad"], survey_values)
        entries = {e.survey_var: e for e in correlation_matrix(mobile, survey)}
        assert entries["lin"].n == 5
        assert entries["lin"].r == pytest.approx(1.0)
        assert entries["quad"].n == 6

    def test_constant_column_is_undefined_not_zero(self):
        sectors = [f"s{i}" for i in range(5)]
        mobile = matrix(sectors, ["m"], np.arange(5.0)[:, None])
        survey = matrix(sectors, ["const"], np.full((5, 1), 3.25))
        (entry,) = correlation_matrix(mobile, survey)
        assert not entry.defined
        assert entry.r is None

    def test_n_equals_three_has_p_but_no_ci(self):
        mobile = matrix(["a", "b", "c"], ["m"], [[1.0], [2.0], [4.0]])
        survey = matrix(["a", "b", "c"], ["v"], [[1.0], [3.0], [2.0]])
        (entry,) = correlation_matrix(mobile, survey)
        assert entry.defined
        assert entry.p is not None
        assert entry.ci_low is None and entry.ci_high is None

    def test_round_trip_csv(self, tmp_path):
        sectors = [f"s{i}" for i in range(6)]
        rng = np.random.default_rng(11)
        mobile = matrix(sectors, ["m1", "m2"], rng.normal(size=(6, 2)))
        survey = matrix(sectors, ["v1"], rng.normal(size=(6, 1)))
        entries = correlation_matrix(mobile, survey)
        path = tmp_path / "correlations.csv"
        write_correlations(entries, path)
        assert read_correlations(path) == entries

    def test_heatmap_output(self, tmp_path):
        sectors = [f"s{i}" for i in range(5)]
        mobile = matrix(sectors, ["m"], np.arange(5.0)[:, None])
        survey = matrix(sectors, ["v"], (np.arange(5.0) * -1)[:, None])
        entries = correlation_matrix(mobile, survey)
        path = tmp_path / "heatmap.csv"
        write_heatmap_data(entries, {"v": "V2"}, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "mobile_var,survey_var,abs_r,category"
        assert lines[1].startswith("m,v,1") and lines[1].endswith("V2")


class TestShuffleNull:
    def build(self, n=40, seed=1):
        rng = np.random.default_rng(seed)
        sectors = [f"s{i:03d}" for i in range(n)]
        w = rng.normal(size=n)
        mobile = matrix(sectors, ["m1", "m2"], np.column_stack([w + 0.1 * rng.normal(size=n),
                                                                rng.normal(size=n)]))
        survey = matrix(sectors, ["v1", "v2"], np.column_stack([w + 0.1 * rng.normal(size=n),
                                                                rng.normal(size=n)]))
        return mobile, survey

    def test_identity_permutation_equals_unshuffled(self):
        mobile, survey = self.build()
        summary = shuffle_null(
            mobile, survey, trials=1, seed=0, perm_fn=lambda rng, n: np.arange(n)
        )
        expected = [abs(e.r) for e in correlation_matrix(mobile, survey) if e.defined]
        assert summary.abs_r_max == pytest.approx(max(expected))
        assert summary.abs_r_p50 == pytest.approx(float(np.quantile(expected, 0.5)))

    def test_same_seed_is_deterministic(self):
        mobile, survey = self.build()
        a = shuffle_null(mobile, survey, trials=50, seed=123)
        b = shuffle_null(mobile, survey, trials=50, seed=123)
        assert a == b

    def test_threads_do_not_change_results(self):
        mobile, survey = self.build()
        a = shuffle_null(mobile, survey, trials=40, seed=9, threads=1)
        b = shuffle_null(mobile, survey, trials=40, seed=9, threads=4)
        assert a == b

    def test_different_seeds_differ(self):
        mobile, survey = self.build()
        assert shuffle_null(mobile, survey, trials=20, seed=1) != shuffle_null(
            mobile, survey, trials=20, seed=2
        )

    def test_shuffling_destroys_planted_correlation(self):
        mobile, survey = self.build(n=80)
        planted = {(e.mobile_var, e.survey_var): e for e in correlation_matrix(mobile, survey)}
        assert planted[("m1", "v1")].r > 0.9
        summary = shuffle_null(mobile, survey, trials=300, seed=4)
        assert summary.abs_r_p95 < 0.35

    def test_quantiles_are_ordered(self):
        mobile, survey = self.build()
        s = shuffle_null(mobile, survey, trials=30, seed=5)
        assert s.abs_r_p50 <= s.abs_r_p95 <= s.abs_r_p99 <= s.abs_r_max <= 1.0

    def test_nan_cells_handled_pairwise(self):
        mobile, survey = self.build(n=30)
        values = survey.values.copy()
        values[::4, 0] = np.nan
        survey = SectorMatrix(survey.sectors, survey.columns, values, survey.counts)
        s = shuffle_null(mobile, survey, trials=20, seed=6)
        assert 0.0 <= s.abs_r_max <= 1.0

    def test_summary_round_trip(self, tmp_path):
        mobile, survey = self.build()
        s = shuffle_null(mobile, survey, trials=25, seed=8)
        path = tmp_path / "null_summary.csv"
        write_null_summary(s, path)
        assert read_null_summary(path) == s
