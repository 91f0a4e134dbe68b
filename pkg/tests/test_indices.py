import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from foodsec.indices import (
    DEFAULT_FCS_WEIGHTS,
    FoodGroupWeights,
    build_survey_matrix,
    classify_fcs,
    coping_strategy_index,
    food_consumption_score,
    load_csi_weights,
    load_fcs_weights,
    load_poverty,
    multidimensional_poverty_index,
    sector_survey_means,
)
from foodsec.ingest import FormatError, load_survey


def stream(body):
    return io.StringIO(body)


class TestFoodConsumptionScore:
    def test_all_zero(self):
        assert food_consumption_score({g: 0 for g in DEFAULT_FCS_WEIGHTS}) == 0.0

    def test_all_seven_is_112(self):
        # 7 x (2+3+1+1+4+4+0.5+0.5+0) = 112 with the default weights.
        assert food_consumption_score({g: 7 for g in DEFAULT_FCS_WEIGHTS}) == 112.0

    def test_partial_groups(self):
        # staples 7*2 + vegetables 7*1 + oil 7*0.5 + sugar 7*0.5 = 28.
        frequencies = {"staples": 7, "vegetables": 7, "oil": 7, "sugar": 7}
        assert food_consumption_score(frequencies) == 28.0

    def test_missing_groups_count_as_zero(self):
        assert food_consumption_score({"staples": 2}) == 4.0

    def test_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            food_consumption_score({"staples": 8})
        with pytest.raises(ValueError):
            food_consumption_score({"staples": -1})

    @settings(max_examples=60, deadline=None)
    @given(
        st.dictionaries(st.sampled_from(sorted(DEFAULT_FCS_WEIGHTS)), st.integers(0, 3), min_size=1),
        st.dictionaries(st.sampled_from(sorted(DEFAULT_FCS_WEIGHTS)), st.integers(0, 3), min_size=1),
    )
    def test_linearity(self, f1, f2):
        combined = {g: f1.get(g, 0) + f2.get(g, 0) for g in set(f1) | set(f2)}
        assert food_consumption_score(combined) == pytest.approx(
            food_consumption_score(f1) + food_consumption_score(f2)
        )

    @settings(max_examples=60, deadline=None)
    @given(
        st.dictionaries(st.sampled_from(sorted(DEFAULT_FCS_WEIGHTS)), st.integers(0, 6), min_size=1),
        st.sampled_from(sorted(DEFAULT_FCS_WEIGHTS)),
    )
    def test_monotone_in_every_frequency(self, frequencies, bump):
        bumped = dict(frequencies)
        bumped[bump] = bumped.get(bump, 0) + 1
        assert food_consumption_score(bumped) >= food_consumption_score(frequencies)


class TestClassifyFcs:
    def test_boundaries_inclusive(self):
        assert classify_fcs(0) == "poor"
        assert classify_fcs(21) == "poor"
        assert classify_fcs(21.0001) == "borderline"
        assert classify_fcs(35) == "borderline"
        assert classify_fcs(35.0001) == "acceptable"
        assert classify_fcs(112) == "acceptable"

    def test_alternate_thresholds(self):
        w = FoodGroupWeights(poor_max=28, borderline_max=42)
        assert classify_fcs(28, w) == "poor"
        assert classify_fcs(42, w) == "borderline"
        assert classify_fcs(43, w) == "acceptable"

    def test_negative_score_rejected(self):
        with pytest.raises(ValueError):
            classify_fcs(-1)

    @settings(max_examples=60, deadline=None)
    @given(st.floats(0, 112), st.floats(0, 112))
    def test_monotone(self, a, b):
        ranking = {"poor": 0, "borderline": 1, "acceptable": 2}
        lo, hi = sorted((a, b))
        assert ranking[classify_fcs(lo)] <= ranking[classify_fcs(hi)]


class TestCopingStrategyIndex:
    def test_all_zero(self):
        assert coping_strategy_index({"skip_meals": 0}, {"skip_meals": 2}) == 0.0

    def test_single_strategy(self):
        assert coping_strategy_index({"skip_meals": 3}, {"skip_meals": 2}) == 6.0

    def test_two_strategies(self):
        # (w=1, f=7) + (w=4, f=2) = 15.
        weights = {"cheaper_food": 1, "sell_assets": 4}
        frequencies = {"cheaper_food": 7, "sell_assets": 2}
        assert coping_strategy_index(frequencies, weights) == 15.0

    def test_unweighted_strategy_rejected(self):
        with pytest.raises(ValueError, match="mystery"):
            coping_strategy_index({"mystery": 1}, {"skip_meals": 2})

    def test_empty_weights_rejected(self):
        with pytest.raises(ValueError):
            coping_strategy_index({}, {})


class TestMpi:
    def test_zero_headcount(self):
        assert multidimensional_poverty_index(0, 0.9) == 0.0

    def test_unit_product(self):
        assert multidimensional_poverty_index(1, 1) == 1.0

    def test_product(self):
        assert multidimensional_poverty_index(0.443, 0.5) == pytest.approx(0.2215)

    def test_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            multidimensional_poverty_index(1.5, 0.5)
        with pytest.raises(ValueError):
            multidimensional_poverty_index(0.5, -0.1)

    @settings(max_examples=100, deadline=None)
    @given(st.floats(0, 1), st.floats(0, 1))
    def test_exact_product_and_bound(self, h, a):
        mpi = multidimensional_poverty_index(h, a)
        assert mpi == h * a
        assert mpi <= min(h, a)


META = "variable,category\nfcs,V2\nexpense,V3\n"


def make_table(rows):
    body = "household_id,sector_id,fcs,expense\n" + "".join(rows)
    return load_survey(stream(body), stream(META))


class TestSectorSurveyMeans:
    def test_simple_mean(self):
        table = make_table(["h1,s1,20,5\n", "h2,s1,40,7\n"])
        matrix = sector_survey_means(table, ["fcs"])
        assert matrix.sectors == ["s1"]
        assert matrix.column("fcs")[0] == pytest.approx(30.0)
        assert matrix.counts.tolist() == [2]

    def test_disjoint_sectors_are_local(self):
        table = make_table(["h1,s1,20,5\n", "h2,s2,40,7\n", "h3,s2,60,9\n"])
        matrix = sector_survey_means(table, ["fcs", "expense"])
        assert matrix.sectors == ["s1", "s2"]
        assert matrix.column("fcs").tolist() == [20.0, 50.0]
        assert matrix.column("expense").tolist() == [5.0, 8.0]

    def test_missing_cells_excluded_pairwise(self):
        table = make_table(["h1,s1,20,\n", "h2,s1,40,8\n"])
        matrix = sector_survey_means(table, ["fcs", "expense"])
        assert matrix.column("fcs")[0] == pytest.approx(30.0)
        assert matrix.column("expense")[0] == pytest.approx(8.0)

    def test_all_missing_cell_is_undefined(self):
        table = make_table(["h1,s1,20,\n"])
        matrix = sector_survey_means(table, ["expense"])
        assert math.isnan(matrix.column("expense")[0])

    def test_unknown_variable_rejected(self):
        with pytest.raises(ValueError):
            sector_survey_means(make_table(["h1,s1,1,1\n"]), ["bogus"])

    @settings(max_examples=25, deadline=None)
    @given(st.randoms(use_true_random=False))
    def test_household_order_invariance(self, rnd):
        rows = [f"h{i},s{i % 3},{i % 8},{i * 2}\n" for i in range(24)]
        shuffled = list(rows)
        rnd.shuffle(shuffled)
        a = sector_survey_means(make_table(rows), ["fcs", "expense"])
        b = sector_survey_means(make_table(shuffled), ["fcs", "expense"])
        assert a.sectors == b.sectors
        assert np.allclose(a.values, b.values, rtol=1e-12, atol=1e-12)


FULL_META = (
    "variable,category\n"
    "staples,food_group\n"
    "sugar,food_group\n"
    "skip_meals,V2\n"
    "expense,V3\n"
)
FULL_BODY = (
    "household_id,sector_id,staples,sugar,skip_meals,expense\n"
    "h1,s1,7,7,2,100\n"
    "h2,s1,0,0,0,50\n"
    "h3,s2,3,2,1,80\n"
)


class TestBuildSurveyMatrix:
    def load(self):
        return load_survey(stream(FULL_BODY), stream(FULL_META))

    def test_fcs_mean_from_matching_groups(self):
        matrix, categories = build_survey_matrix(self.load())
        # h1: 7*2 + 7*0.5 = 17.5; h2: 0 -> mean 8.75 in s1.
        assert matrix.column("fcs_mean").tolist()[0] == pytest.approx(8.75)
        assert matrix.column("fcs_mean").tolist()[1] == pytest.approx(3 * 2 + 2 * 0.5)
        assert categories["fcs_mean"] == "composite"

    def test_csi_with_weights(self):
        matrix, _ = build_survey_matrix(self.load(), csi_weights={"skip_meals": 4.0})
        assert matrix.column("csi_mean").tolist() == [pytest.approx(4.0), pytest.approx(4.0)]

    def test_csi_undefined_without_weights(self):
        matrix, _ = build_survey_matrix(self.load())
        assert all(math.isnan(v) for v in matrix.column("csi_mean"))

    def test_mpi_from_poverty_table(self):
        matrix, _ = build_survey_matrix(self.load(), poverty={"s1": (0.4, 0.5), "s2": (0.2, 0.5)})
        assert matrix.column("mpi").tolist() == [pytest.approx(0.2), pytest.approx(0.1)]

    def test_mpi_undefined_for_missing_sector(self):
        matrix, _ = build_survey_matrix(self.load(), poverty={"s1": (0.4, 0.5)})
        assert matrix.column("mpi")[0] == pytest.approx(0.2)
        assert math.isnan(matrix.column("mpi")[1])

    def test_variable_subset(self):
        matrix, categories = build_survey_matrix(self.load(), variables=["expense"])
        assert matrix.columns == ["expense", "fcs_mean", "csi_mean", "mpi"]
        assert categories["expense"] == "V3"


class TestLoaders:
    def test_fcs_weights_file(self):
        w = load_fcs_weights(stream("food_group,weight\nstaples,2\nsugar,0.5\n"))
        assert w.weights == {"staples": 2.0, "sugar": 0.5}
        assert (w.poor_max, w.borderline_max) == (21.0, 35.0)

    def test_fcs_threshold_override(self):
        w = load_fcs_weights(stream("food_group,weight\nstaples,2\n"), 28, 42)
        assert (w.poor_max, w.borderline_max) == (28.0, 42.0)

    def test_csi_weights_file(self):
        assert load_csi_weights(stream("strategy,weight\nskip_meals,4\n")) == {"skip_meals": 4.0}

    def test_negative_weight_rejected(self):
        with pytest.raises(FormatError):
            load_csi_weights(stream("strategy,weight\nskip_meals,-1\n"))

    def test_poverty_file(self):
        p = load_poverty(stream("sector_id,headcount,intensity\ns1,0.4,0.5\n"))
        assert p == {"s1": (0.4, 0.5)}

    def test_poverty_out_of_range_rejected(self):
        with pytest.raises(FormatError):
            load_poverty(stream("sector_id,headcount,intensity\ns1,1.4,0.5\n"))

    def test_duplicate_sector_rejected(self):
        with pytest.raises(FormatError):
            load_poverty(stream("sector_id,headcount,intensity\ns1,0.4,0.5\ns1,0.4,0.5\n"))
