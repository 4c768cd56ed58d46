from __future__ import annotations

import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from hcr_assess.errors import DegenerateIndicatorError
from hcr_assess.ingest import ListSource, ResearcherRecord
from hcr_assess.ranking import (
    IBB_GLOBAL_TOTAL,
    Basis,
    Metric,
    career_onset_distribution,
    comparison_filter,
    default_global_total,
    metric_value,
    normalize,
    rank_countries,
    rank_scatter,
    rerank,
)
from hcr_assess.registry import CountryAggregate, read_aggregates
from hcr_assess.worldbank import IndicatorSnapshot

from conftest import FIXTURES


def agg(code, ibb=0, wos=None, P=None, p10=None):
    return CountryAggregate(code, "2006-2009", ibb, wos, P, None, None, p10, None)


def researcher(i, year):
    return ResearcherRecord(str(i), "", "", "AAA", year, ListSource.IBB, 2020)


# -- rank_countries -------------------------------------------------------------

def test_usa_share_of_full_roster():
    entries = rank_countries([agg("USA", 68016), agg("GBR", 15001)])
    assert entries[0].country_code == "USA"
    assert entries[0].cumulative_share == pytest.approx(0.4259, abs=5e-5)
    assert entries[0].rank == 1 and entries[1].rank == 2


def test_top_ten_share_of_ranking():
    entries = rank_countries(read_aggregates(FIXTURES / "ranking46_aggregates.csv"), threshold=30)
    assert sum(e.value for e in entries[:10]) == 128469
    assert entries[9].cumulative_share == pytest.approx(0.8045, abs=5e-5)


def test_threshold_above_everything_is_empty():
    assert rank_countries([agg("AAA", 10), agg("BBB", 20)], threshold=1000) == []


def test_single_country():
    (e,) = rank_countries([agg("AAA", 500)], global_total=2000)
    assert (e.rank, e.cumulative_share) == (1, 0.25)


def test_ties_broken_by_code():
    entries = rank_countries([agg("ZZZ", 5), agg("AAA", 5), agg("MMM", 9)], global_total=100)
    assert [e.country_code for e in entries] == ["MMM", "AAA", "ZZZ"]


def test_missing_metric_is_left_out():
    entries = rank_countries([agg("AAA", 5, wos=2), agg("BBB", 7)], Metric.WOS_HCR, global_total=10)
    assert [e.country_code for e in entries] == ["AAA"]


def test_predicted_metric():
    v = metric_value(agg("AUS", 5441, P=71777, p10=7673), Metric.PREDICTED_WOS)
    assert v == pytest.approx(62.1782532203, rel=1e-10)
    assert metric_value(agg("AUS", 5441), Metric.PREDICTED_WOS) is None


def test_default_totals():
    assert default_global_total(Metric.IBB_HCR, [1, 2]) == IBB_GLOBAL_TOTAL
    assert default_global_total(Metric.P, [1.5, 2.5]) == 4.0


values = st.dictionaries(st.sampled_from([f"C{i:02d}" for i in range(30)]), st.integers(0, 10_000), min_size=1)


@given(values, st.integers(0, 5000), st.randoms(use_true_random=False))
def test_ranking_properties(vals, threshold, rnd):
    aggs = [agg(c, v) for c, v in vals.items()]
    total = sum(vals.values()) + 1
    entries = rank_countries(aggs, threshold=threshold, global_total=total)
    assert [e.rank for e in entries] == list(range(1, len(entries) + 1))
    shares = [e.cumulative_share for e in entries]
    assert shares == sorted(shares)
    if entries:
        assert shares[-1] == pytest.approx(sum(e.value for e in entries) / total)
        assert shares[-1] <= 1
    rnd.shuffle(aggs)
    assert rank_countries(aggs, threshold=threshold, global_total=total) == entries


# -- normalize / rerank -------------------------------------------------------------

def snapshot(pop=None, gdp=None):
    return IndicatorSnapshot(2019, dict(pop or {}), dict(gdp or {}))


def test_normalize_population_and_gdp():
    entries = rank_countries([agg("CHE", 2546), agg("GBR", 15001)], global_total=IBB_GLOBAL_TOTAL)
    snap = snapshot({"CHE": 8_574_832, "GBR": 66_836_327}, {"GBR": 2.8e12})
    out = normalize(normalize(entries, snap, Basis.POPULATION), snap, Basis.GDP)
    by = {e.country_code: e for e in out}
    assert by["CHE"].per_million == pytest.approx(2546 / 8.574832)
    assert by["GBR"].per_billion_gdp == pytest.approx(15001 / 2800)
    assert by["CHE"].per_billion_gdp is None
    # order and raw values untouched
    assert [(e.country_code, e.value, e.rank) for e in out] == [(e.country_code, e.value, e.rank) for e in entries]


def test_zero_population_is_degenerate():
    entries = rank_countries([agg("AAA", 5)], global_total=10)
    with pytest.raises(DegenerateIndicatorError, match="degenerate indicator"):
        normalize(entries, snapshot({"AAA": 0}), Basis.POPULATION)


def test_missing_country_warns_and_is_kept(caplog):
    entries = rank_countries([agg("AAA", 5)], global_total=10)
    out = normalize(entries, snapshot(), Basis.POPULATION)
    assert out == entries
    assert "AAA" in caplog.text


def test_rerank_by_per_capita():
    entries = rank_countries([agg("BIG", 100), agg("SML", 10)], global_total=200)
    snap = snapshot({"BIG": 1e8, "SML": 1e6})
    out = rerank(normalize(entries, snap, Basis.POPULATION), Basis.POPULATION, 200)
    assert [(e.country_code, e.rank) for e in out] == [("SML", 1), ("BIG", 2)]
    assert out[0].cumulative_share == pytest.approx(10 / 200)


# -- comparison_filter ---------------------------------------------------------------

def test_filter_identity_and_empty():
    aggs = [agg("AAA", 1, 0), agg("BBB", 1, 5), agg("CHN", 1, 50)]
    assert comparison_filter(aggs, min_wos=0, exclusions=()) == aggs
    assert comparison_filter(aggs, min_wos=100) == []
    assert [a.country_code for a in comparison_filter(aggs)] == ["BBB"]


@given(st.lists(st.tuples(st.sampled_from(["AAA", "BBB", "CHN", "DDD"]), st.one_of(st.none(), st.integers(0, 6)))),
       st.integers(0, 6))
def test_filter_is_idempotent_subset(rows, k):
    aggs = [agg(c, 1, w) for c, w in rows]
    once = comparison_filter(aggs, k)
    assert all(a in aggs for a in once)
    assert comparison_filter(once, k) == once


def test_filter_51_country_fixture_keeps_33():
    aggs = read_aggregates(FIXTURES / "filter51_aggregates.csv")
    assert len(aggs) == 51
    assert len(comparison_filter(aggs)) == 33


# -- rank_scatter ----------------------------------------------------------------------

def test_identical_lists_have_zero_deviation():
    pairs = [("A", 3.0), ("B", 1.0), ("C", 2.0)]
    assert all(r.deviation == 0 for r in rank_scatter(pairs, pairs))


def test_swapped_pair():
    rows = rank_scatter([("A", 3), ("B", 2), ("C", 1)], [("A", 3), ("B", 1), ("C", 2)])
    assert [(r.country_code, r.deviation) for r in rows] == [("A", 0), ("B", -1), ("C", 1)]


def test_mismatched_sets_list_difference():
    with pytest.raises(ValueError, match="AAA, ZZZ"):
        rank_scatter([("AAA", 1), ("BBB", 2)], [("BBB", 2), ("ZZZ", 1)])


def test_largest_rank_deviations_of_predictions():
    aggs = read_aggregates(FIXTURES / "predicted31_aggregates.csv")
    left = [(a.country_code, metric_value(a, Metric.PREDICTED_WOS)) for a in aggs]
    right = [(a.country_code, float(a.wos_hcr)) for a in aggs]
    rows = sorted(rank_scatter(left, right), key=lambda r: -abs(r.deviation))
    top = [r.country_code for r in rows[:8]]
    assert "SAU" in top and "JPN" in top


# -- career_onset_distribution ---------------------------------------------------------------

def test_onset_small():
    d = career_onset_distribution([researcher(i, y) for i, y in enumerate([1980, 1980, 1990])])
    assert dict(zip(d.years, d.counts))[1980] == 2
    assert dict(zip(d.years, d.counts))[1990] == 1
    assert d.median_year == 1980


def test_onset_uniform_decade():
    d = career_onset_distribution([researcher(y, y) for y in range(1970, 1980)])
    assert d.median_year == 1974


def test_onset_constructed_median_1984():
    # 499 researchers before 1984, 2 in 1984, 499 after: 1984 is the first year reaching 500 of 1000
    years = [1960 + i % 24 for i in range(499)] + [1984, 1984] + [1985 + i % 30 for i in range(499)]
    records = [researcher(i, y) for i, y in enumerate(years)]
    random.Random(3).shuffle(records)
    d = career_onset_distribution(records)
    assert d.cumulative[d.years.index(1983)] == 499
    assert d.median_year == 1984


def test_onset_skips_missing_years():
    recs = [researcher(1, 1990), researcher(2, None), researcher(3, None)]
    d = career_onset_distribution(recs)
    assert d.skipped == 2
    assert sum(d.counts) + d.skipped == len(recs)


def test_onset_without_years_errors():
    with pytest.raises(ValueError):
        career_onset_distribution([researcher(1, None)])
