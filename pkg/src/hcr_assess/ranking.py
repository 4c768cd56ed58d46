"""Country rankings, normalized indicators and plot-ready pairings."""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, replace
from enum import Enum
from typing import Iterable, Optional, Sequence

from .errors import DegenerateIndicatorError
from .extrapolation import DEFAULT_X, DEFAULT_Y, ep_from_metrics, predict_wos
from .ingest import ResearcherRecord
from .registry import CountryAggregate
from .stats import rank_vector
from .worldbank import IndicatorSnapshot

logger = logging.getLogger(__name__)

# full roster sizes of the 2020 indicator-based list and the 2014 citation list
IBB_GLOBAL_TOTAL = 159_684
WOS_GLOBAL_TOTAL = 3_216


class Metric(str, Enum):
    IBB_HCR = "IBB_HCR"
    WOS_HCR = "WOS_HCR"
    PREDICTED_WOS = "PREDICTED_WOS"
    P = "P"
    P_TOP1 = "P_TOP1"
    P_TOP5 = "P_TOP5"
    P_TOP10 = "P_TOP10"
    P_TOP50 = "P_TOP50"


class Basis(str, Enum):
    POPULATION = "POPULATION"
    GDP = "GDP"


@dataclass(frozen=True)
class RankingEntry:
    country_code: str
    value: float
    rank: int
    cumulative_share: float
    per_million: Optional[float] = None
    per_billion_gdp: Optional[float] = None


@dataclass(frozen=True)
class OnsetDistribution:
    years: tuple[int, ...]
    counts: tuple[int, ...]
    cumulative: tuple[int, ...]
    median_year: int
    skipped: int = 0


@dataclass(frozen=True)
class ScatterRow:
    country_code: str
    value_left: float
    value_right: float
    rank_left: float
    rank_right: float

    @property
    def deviation(self) -> float:
        return self.rank_left - self.rank_right


def metric_value(
    agg: CountryAggregate, metric: Metric, x: float = DEFAULT_X, y: float = DEFAULT_Y
) -> Optional[float]:
    """The requested indicator for one country, or None when it cannot be computed."""
    metric = Metric(metric)
    if metric is Metric.IBB_HCR:
        return float(agg.ibb_hcr)
    if metric is Metric.WOS_HCR:
        return None if agg.wos_hcr is None else float(agg.wos_hcr)
    if metric is Metric.PREDICTED_WOS:
        if agg.P is None or agg.p_top10 is None or agg.P <= 0:
            return None
        model = ep_from_metrics(agg.P, agg.p_top10)
        if not 0.0 < model.ep < 1.0:
            return None
        return predict_wos(agg.ibb_hcr, model, x, y)
    attr = {
        Metric.P: "P",
        Metric.P_TOP1: "p_top1",
        Metric.P_TOP5: "p_top5",
        Metric.P_TOP10: "p_top10",
        Metric.P_TOP50: "p_top50",
    }[metric]
    return getattr(agg, attr)


def _order(items: Iterable[tuple[str, float]]) -> list[tuple[str, float]]:
    return sorted(items, key=lambda kv: (-kv[1], kv[0]))


def _with_shares(ordered: Sequence[tuple[str, float]], total: float) -> list[RankingEntry]:
    out = []
    running = 0.0
    for i, (code, value) in enumerate(ordered, start=1):
        running += value
        out.append(RankingEntry(code, value, i, running / total if total > 0 else 0.0))
    return out


def default_global_total(metric: Metric | str, values: Iterable[float]) -> float:
    """Full roster size for researcher lists; otherwise the sum of ``values``."""
    metric = Metric(metric)
    if metric is Metric.IBB_HCR:
        return IBB_GLOBAL_TOTAL
    if metric is Metric.WOS_HCR:
        return WOS_GLOBAL_TOTAL
    return sum(values)


def rank_countries(
    aggregates: Sequence[CountryAggregate],
    metric: Metric | str = Metric.IBB_HCR,
    threshold: float = 0,
    global_total: Optional[float] = None,
    x: float = DEFAULT_X,
    y: float = DEFAULT_Y,
) -> list[RankingEntry]:
    """Rank countries by ``metric`` (largest first, ties by country code).

    Countries below ``threshold`` are dropped. Cumulative shares are taken
    against ``global_total``: the full roster size for researcher counts,
    the unfiltered sum otherwise.
    """
    metric = Metric(metric)
    values = []
    for agg in aggregates:
        v = metric_value(agg, metric, x, y)
        if v is None:
            logger.warning("%s: no %s value, left out of ranking", agg.country_code, metric.value)
            continue
        values.append((agg.country_code, v))
    if global_total is None:
        global_total = default_global_total(metric, [v for _, v in values])
    kept = [(c, v) for c, v in values if v >= threshold]
    return _with_shares(_order(kept), global_total)


def normalize(
    entries: Sequence[RankingEntry], snapshot: IndicatorSnapshot, basis: Basis | str
) -> list[RankingEntry]:
    """Attach per-million-inhabitants or per-billion-US$ values; order and ``value`` are untouched."""
    basis = Basis(basis)
    table = snapshot.population if basis is Basis.POPULATION else snapshot.gdp_usd
    out = []
    for e in entries:
        denom = table.get(e.country_code)
        if denom is None:
            logger.warning("%s: no %s in %d snapshot", e.country_code, basis.value.lower(), snapshot.year)
            out.append(e)
            continue
        if not denom > 0:
            raise DegenerateIndicatorError(f"degenerate indicator: {basis.value.lower()} of {e.country_code} is {denom}")
        if basis is Basis.POPULATION:
            out.append(replace(e, per_million=e.value / denom * 1e6))
        else:
            out.append(replace(e, per_billion_gdp=e.value / (denom / 1e9)))
    return out


def rerank(entries: Sequence[RankingEntry], basis: Basis | str, global_total: float) -> list[RankingEntry]:
    """Reorder by a normalized value; entries without it are dropped."""
    basis = Basis(basis)
    attr = "per_million" if basis is Basis.POPULATION else "per_billion_gdp"
    by_code = {e.country_code: e for e in entries}
    keyed = [(e.country_code, getattr(e, attr)) for e in entries if getattr(e, attr) is not None]
    out = []
    running = 0.0
    for i, (code, _) in enumerate(_order(keyed), start=1):
        e = by_code[code]
        running += e.value
        out.append(replace(e, rank=i, cumulative_share=running / global_total if global_total > 0 else 0.0))
    return out


def comparison_filter(
    aggregates: Iterable[CountryAggregate], min_wos: int = 3, exclusions: Iterable[str] = ("CHN",)
) -> list[CountryAggregate]:
    """Keep countries with at least ``min_wos`` strict-list researchers and not excluded."""
    excluded = set(exclusions)
    return [
        a for a in aggregates
        if a.country_code not in excluded and (a.wos_hcr if a.wos_hcr is not None else 0) >= min_wos
    ]


def rank_scatter(left: Sequence[tuple[str, float]], right: Sequence[tuple[str, float]]) -> list[ScatterRow]:
    """Pair descending ranks of two indicators; rows sorted by the left rank."""
    lmap, rmap = dict(left), dict(right)
    if len(lmap) != len(left) or len(rmap) != len(right):
        raise ValueError("duplicate country in scatter input")
    diff = set(lmap) ^ set(rmap)
    if diff:
        raise ValueError(f"country sets differ: {', '.join(sorted(diff))}")
    codes = sorted(lmap)
    rl = rank_vector([lmap[c] for c in codes])
    rr = rank_vector([rmap[c] for c in codes])
    rows = [ScatterRow(c, lmap[c], rmap[c], a, b) for c, a, b in zip(codes, rl, rr)]
    return sorted(rows, key=lambda r: (r.rank_left, r.country_code))


def career_onset_distribution(records: Iterable[ResearcherRecord]) -> OnsetDistribution:
    """Researchers per first-publication year, with one-year bins over the observed span."""
    counter: Counter[int] = Counter()
    skipped = 0
    for r in records:
        if r.first_pub_year is None:
            skipped += 1
        else:
            counter[r.first_pub_year] += 1
    if not counter:
        raise ValueError("no records carry a first publication year")
    years = tuple(range(min(counter), max(counter) + 1))
    counts = tuple(counter.get(y, 0) for y in years)
    cumulative = []
    running = 0
    for c in counts:
        running += c
        cumulative.append(running)
    total = running
    # smallest year whose cumulative count reaches half the total
    median = next(y for y, cum in zip(years, cumulative) if 2 * cum >= total)
    return OnsetDistribution(years, counts, tuple(cumulative), median, skipped)
