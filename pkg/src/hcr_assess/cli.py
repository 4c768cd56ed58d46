"""Command-line entry point: ``hcr-assess <command> [options]``.

Exit codes: 0 success, 1 I/O or schema error, 2 statistical precondition
failure, 3 ambiguous institution matches without ``--allow-unmatched``.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import shutil
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional, Sequence

from . import __version__
from .config import RunConfig, load_config, write_manifest
from .errors import DegenerateSystemError, HcrError, InsufficientDataError
from .extrapolation import ep_from_metrics, level_gap, predict_wos, round_half_away
from .ingest import CountingMode, ListSource, format_number, read_metrics, read_roster, write_metrics, write_report, write_roster
from .ranking import (
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
from .registry import AggregationPolicy, CountryAggregate, aggregate_country, load_registry, read_aggregates, write_aggregates, write_audit
from .stats import CorrelationResult, PairedSeries, pearson, rank_vector, spearman
from .worldbank import Mode, fetch_indicators, shipped_snapshot_path, write_snapshot

logger = logging.getLogger("hcr_assess")


# -- formatting ---------------------------------------------------------------

def _num(x: Optional[float]) -> str:
    return "" if x is None else format_number(x)


def _fixed(x: Optional[float], places: int) -> str:
    return "" if x is None else f"{x:.{places}f}"


def _p_text(res: CorrelationResult) -> str:
    if res.p_two_sided > 0:
        return f"{res.p_two_sided:.1e}"
    if math.isinf(res.log_p):
        return "0"
    return f"1e{res.log10_p:.1f}"


def _corr_json(res: CorrelationResult) -> dict[str, Any]:
    return {
        "method": res.method.value,
        "r": res.r,
        "r_display": f"{res.r:.3f}",
        "n": res.n,
        "p_two_sided": res.p_two_sided,
        "log10_p": None if math.isinf(res.log_p) else res.log10_p,
        "p_display": _p_text(res),
        "p_method": res.p_method,
        "excluded": list(res.excluded),
    }


def _corr_line(label: str, res: CorrelationResult) -> str:
    excl = f", excluding {', '.join(res.excluded)}" if res.excluded else ""
    return f"{label}: {res.method.value.title()} r={res.r:.2f} (p={_p_text(res)}, n={res.n}{excl})"


def _write_csv(path: Path, header: Sequence[str], rows: Sequence[Sequence[Any]]) -> Path:
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    return path


def _write_json(path: Path, payload: Any) -> Path:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


# -- pipeline helpers -----------------------------------------------------------

@dataclass
class Context:
    config: RunConfig
    out_dir: Path
    outputs: list[Path]

    def emit(self, path: Path) -> Path:
        self.outputs.append(path)
        return path


def _load_rosters(cfg: RunConfig):
    records = []
    reports = {}
    for source, path, year in (
        (ListSource.IBB, cfg.ibb_roster, cfg.ibb_list_year),
        (ListSource.WOS, cfg.wos_roster, cfg.wos_list_year),
    ):
        if path is None:
            continue
        recs, report = read_roster(path, source, year)
        records.extend(recs)
        reports[source] = (recs, report)
        if report.rejects:
            logger.warning("%s: %d of %d rows rejected", path, len(report.rejects), report.rows_read)
    return records, reports


def _aggregates(ctx: Context) -> list[CountryAggregate]:
    cfg = ctx.config
    if cfg.aggregates is not None:
        return read_aggregates(cfg.aggregates)
    if cfg.registry is None:
        raise HcrError("either --aggregates or --registry (with rosters/metrics) is required")
    registry = load_registry(cfg.registry, cfg.aliases)
    records, _ = _load_rosters(cfg)
    metrics = []
    if cfg.metrics is not None:
        metrics, report = read_metrics(cfg.metrics)
        if report.rejects:
            logger.warning("%s: %d of %d rows rejected", cfg.metrics, len(report.rejects), report.rows_read)
    policy = AggregationPolicy(
        period=cfg.period,
        counting_mode=CountingMode(cfg.counting_mode.upper()),
        field_label=cfg.field_label,
        use_record_country_on_unmatched=cfg.use_record_country_on_unmatched,
        allow_unmatched=cfg.allow_unmatched,
        country_remap=dict(cfg.country_remap),
    )
    result = aggregate_country(records, metrics, registry, policy)
    ctx.emit(ctx.out_dir / "match_audit.csv")
    write_audit(result.audit, ctx.out_dir / "match_audit.csv")
    return result.aggregates


def _series(aggs: Sequence[CountryAggregate], xm: Metric, ym: Metric, cfg: RunConfig) -> PairedSeries:
    rows = []
    for a in aggs:
        xv = metric_value(a, xm, cfg.x, cfg.y)
        yv = metric_value(a, ym, cfg.x, cfg.y)
        if xv is None or yv is None:
            logger.warning("%s: missing %s or %s, skipped", a.country_code, xm.value, ym.value)
            continue
        rows.append((a.country_code, xv, yv))
    if not rows:
        return PairedSeries((), (), ())
    labels, xs, ys = zip(*rows)
    return PairedSeries(labels, xs, ys)


def _scatter_files(ctx: Context, series: PairedSeries, stem: str, xname: str, yname: str, exclude=()) -> None:
    excluded = set(exclude)
    data_rows = [
        (lab, _num(xv), _num(yv), "1" if lab in excluded else "0")
        for lab, xv, yv in zip(series.labels, series.xs, series.ys)
    ]
    ctx.emit(_write_csv(ctx.out_dir / f"{stem}_data.csv", ("country_code", xname, yname, "excluded_from_pearson"), data_rows))
    pairs_l = list(zip(series.labels, series.xs))
    pairs_r = list(zip(series.labels, series.ys))
    rows = [
        (r.country_code, _num(r.rank_left), _num(r.rank_right), _num(r.deviation))
        for r in rank_scatter(pairs_l, pairs_r)
    ]
    ctx.emit(_write_csv(
        ctx.out_dir / f"{stem}_ranks.csv",
        ("country_code", f"rank_{xname}", f"rank_{yname}", "deviation"),
        rows,
    ))


# -- commands -------------------------------------------------------------------

def cmd_ingest(ctx: Context) -> int:
    cfg = ctx.config
    if cfg.ibb_roster is None and cfg.wos_roster is None and cfg.metrics is None:
        raise HcrError("nothing to ingest: give --ibb-roster, --wos-roster and/or --metrics")
    _, reports = _load_rosters(cfg)
    for source, (recs, report) in reports.items():
        name = source.value.lower()
        write_roster(recs, ctx.emit(ctx.out_dir / f"roster_{name}.csv"))
        write_report(report, ctx.emit(ctx.out_dir / f"ingest_report_{name}.csv"))
        print(f"{source.value} roster: {report.rows_accepted} accepted, {len(report.rejects)} rejected")
    if cfg.metrics is not None:
        rows, report = read_metrics(cfg.metrics)
        write_metrics(rows, ctx.emit(ctx.out_dir / "metrics.csv"))
        write_report(report, ctx.emit(ctx.out_dir / "ingest_report_metrics.csv"))
        print(f"metrics: {report.rows_accepted} accepted, {len(report.rejects)} rejected")
    return 0


def cmd_aggregate(ctx: Context) -> int:
    aggs = _aggregates(ctx)
    write_aggregates(aggs, ctx.emit(ctx.out_dir / "aggregates.csv"))
    print(f"{len(aggs)} countries aggregated for {ctx.config.period}")
    return 0


def cmd_validate(ctx: Context) -> int:
    cfg = ctx.config
    aggs = _aggregates(ctx)
    if cfg.apply_comparison_filter:
        aggs = comparison_filter(aggs, cfg.min_wos, cfg.filter_exclusions)
    xm, ym = Metric(cfg.x_metric.upper()), Metric(cfg.y_metric.upper())
    series = _series(aggs, xm, ym, cfg)
    rho = spearman(series, cfg.spearman_exclusions)
    r = pearson(series, cfg.pearson_exclusions)
    ctx.emit(_write_json(ctx.out_dir / "correlations.json", {
        "x_metric": xm.value,
        "y_metric": ym.value,
        "spearman": _corr_json(rho),
        "pearson": _corr_json(r),
    }))
    _scatter_files(ctx, series, "validate_scatter", xm.value.lower(), ym.value.lower(), r.excluded)
    print(_corr_line(f"{xm.value} vs {ym.value}", rho))
    print(_corr_line(f"{xm.value} vs {ym.value}", r))
    return 0


@dataclass
class Prediction:
    code: str
    ibb: int
    P: float
    p_top10: float
    ratio: float
    calculated: float
    reported: Optional[int]


def _predictions(aggs: Sequence[CountryAggregate], x: float, y: float) -> list[Prediction]:
    out = []
    for a in aggs:
        if a.P is None or a.p_top10 is None:
            logger.warning("%s: no P or p_top10, skipped", a.country_code)
            continue
        try:
            model = ep_from_metrics(a.P, a.p_top10)
            calc = predict_wos(a.ibb_hcr, model, x, y)
        except DegenerateSystemError as exc:
            logger.warning("%s: %s, skipped", a.country_code, exc)
            continue
        out.append(Prediction(a.country_code, a.ibb_hcr, a.P, a.p_top10, model.ep, calc, a.wos_hcr))
    return out


def cmd_predict_wos(ctx: Context) -> int:
    cfg = ctx.config
    preds = _predictions(_aggregates(ctx), cfg.x, cfg.y)
    with_reported = [p for p in preds if p.reported is not None]
    header = ["country_code", "ibb_hcr", "P", "p_top10", "ratio", "ratio_display", "calculated", "calculated_rounded"]
    if with_reported:
        header += ["reported", "deviation"]
    rows = []
    for p in preds:
        row = [p.code, p.ibb, _num(p.P), _num(p.p_top10), _num(p.ratio), f"{p.ratio:.3f}",
               _num(p.calculated), round_half_away(p.calculated)]
        if with_reported:
            row += ["" if p.reported is None else p.reported,
                    "" if p.reported is None else _num(p.reported - p.calculated)]
        rows.append(row)
    ctx.emit(_write_csv(ctx.out_dir / "predict_wos.csv", header, rows))
    print(f"{'country':8}{'IBB':>8}{'ratio':>8}{'calc':>7}{'rep':>7}")
    for p in preds:
        rep = "" if p.reported is None else str(p.reported)
        print(f"{p.code:8}{p.ibb:>8}{p.ratio:>8.3f}{round_half_away(p.calculated):>7}{rep:>7}")
    if len(with_reported) >= 3:
        calc_of = (lambda p: float(round_half_away(p.calculated))) if cfg.correlate_rounded else (lambda p: p.calculated)
        series = PairedSeries(
            tuple(p.code for p in with_reported),
            tuple(calc_of(p) for p in with_reported),
            tuple(float(p.reported) for p in with_reported),
        )
        rho = spearman(series, cfg.spearman_exclusions)
        r = pearson(series, cfg.pearson_exclusions)
        ctx.emit(_write_json(ctx.out_dir / "predict_wos_correlations.json", {
            "x": cfg.x,
            "y": cfg.y,
            "correlated_on": "rounded" if cfg.correlate_rounded else "full_precision",
            "spearman": _corr_json(rho),
            "pearson": _corr_json(r),
        }))
        _scatter_files(ctx, series, "predict_wos_scatter", "calculated", "reported", r.excluded)
        print(_corr_line("calculated vs reported", rho))
        print(_corr_line("calculated vs reported", r))
    return 0


def _snapshot(ctx: Context, countries: Sequence[str]):
    cfg = ctx.config
    if cfg.offline:
        cache = cfg.indicators or shipped_snapshot_path()
        return fetch_indicators(countries, cfg.indicator_year, Mode.OFFLINE, cache, cfg.overrides)
    cache = Path(cfg.indicators) if cfg.indicators else ctx.out_dir / "worldbank_cache.csv"
    if not cache.is_file():
        shutil.copyfile(shipped_snapshot_path(), cache)
    return fetch_indicators(countries, cfg.indicator_year, Mode.LIVE, cache, cfg.overrides)


def _ranking_rows(entries):
    return [
        (e.rank, e.country_code, _num(e.value), _num(e.cumulative_share), f"{100 * e.cumulative_share:.1f}",
         _num(e.per_million), _fixed(e.per_million, 2), _num(e.per_billion_gdp), _fixed(e.per_billion_gdp, 2))
        for e in entries
    ]


RANKING_HEADER = (
    "rank", "country_code", "value", "cumulative_share", "cumulative_share_pct_display",
    "per_million", "per_million_display", "per_billion_gdp", "per_billion_gdp_display",
)


def cmd_rank(ctx: Context, metric: Metric = Metric.IBB_HCR) -> int:
    cfg = ctx.config
    aggs = _aggregates(ctx)
    entries = rank_countries(aggs, metric, cfg.threshold, cfg.global_total, cfg.x, cfg.y)
    snap = _snapshot(ctx, [e.country_code for e in entries])
    entries = normalize(normalize(entries, snap, Basis.POPULATION), snap, Basis.GDP)
    total = cfg.global_total
    if total is None:
        total = default_global_total(metric, [v for v in (metric_value(a, metric, cfg.x, cfg.y) for a in aggs) if v is not None])
    per_capita = rerank(entries, Basis.POPULATION, total)
    per_gdp = rerank(entries, Basis.GDP, total)
    ctx.emit(_write_csv(ctx.out_dir / "ranking_raw.csv", RANKING_HEADER, _ranking_rows(entries)))
    ctx.emit(_write_csv(ctx.out_dir / "ranking_per_million.csv", RANKING_HEADER, _ranking_rows(per_capita)))
    ctx.emit(_write_csv(ctx.out_dir / "ranking_per_gdp.csv", RANKING_HEADER, _ranking_rows(per_gdp)))
    ctx.emit(_write_json(ctx.out_dir / "cumulative_share.json", [
        {"rank": e.rank, "country_code": e.country_code, "cumulative_share": e.cumulative_share} for e in entries
    ]))
    ctx.emit(_write_json(ctx.out_dir / "indicator_coverage.json", {
        "year": snap.year,
        "missing": snap.missing,
        "sources": {k: v.value for k, v in sorted(snap.sources.items())},
    }))
    print(f"{len(entries)} countries at threshold {cfg.threshold:g}")
    for label, lst, attr, places in (
        ("raw", entries, "value", 0),
        ("per million inhabitants", per_capita, "per_million", 2),
        ("per billion US$ GDP", per_gdp, "per_billion_gdp", 2),
    ):
        head = ", ".join(f"{e.country_code} {getattr(e, attr):.{places}f}" for e in lst[:5])
        print(f"top by {label}: {head}")
    if entries:
        print(f"cumulative share: rank 1 {100 * entries[0].cumulative_share:.1f}%, "
              f"rank {min(10, len(entries))} {100 * entries[min(10, len(entries)) - 1].cumulative_share:.1f}%")
    return 0


def sweep_rows(preds: Sequence[Prediction], x: float, grid: Sequence[float]) -> list[dict[str, Any]]:
    """For each ``y``: summed |calculated - reported| and summed |rank difference|.

    The minimizer is the ``y`` with the smallest summed count deviation
    (rank deviation breaks ties, then the earlier grid entry).
    """
    scored = [p for p in preds if p.reported is not None]
    if not scored:
        raise InsufficientDataError("sweep-y needs reported counts")
    out = []
    for y in grid:
        model_preds = []
        for p in scored:
            model = ep_from_metrics(p.P, p.p_top10)
            model_preds.append(predict_wos(p.ibb, model, x, y))
        reported = [float(p.reported) for p in scored]
        count_dev = math.fsum(abs(c - r) for c, r in zip(model_preds, reported))
        rank_dev = math.fsum(abs(a - b) for a, b in zip(rank_vector(model_preds), rank_vector(reported)))
        out.append({"y": y, "exponent": level_gap(x, y), "n": len(scored),
                    "abs_count_deviation": count_dev, "abs_rank_deviation": rank_dev})
    best = min(range(len(out)), key=lambda i: (out[i]["abs_count_deviation"], out[i]["abs_rank_deviation"], i))
    for i, row in enumerate(out):
        row["minimizer"] = i == best
    return out


def cmd_sweep_y(ctx: Context) -> int:
    cfg = ctx.config
    rows = sweep_rows(_predictions(_aggregates(ctx), cfg.x, cfg.y), cfg.x, cfg.y_grid)
    ctx.emit(_write_csv(
        ctx.out_dir / "sweep_y.csv",
        ("y", "exponent", "n", "abs_count_deviation", "abs_rank_deviation", "minimizer"),
        [(_num(r["y"]), _num(r["exponent"]), r["n"], _num(r["abs_count_deviation"]),
          _num(r["abs_rank_deviation"]), int(r["minimizer"])) for r in rows],
    ))
    for r in rows:
        mark = "  <- minimum" if r["minimizer"] else ""
        print(f"y={r['y']:g}: sum|calc-rep|={r['abs_count_deviation']:.1f} "
              f"sum|rank diff|={r['abs_rank_deviation']:g}{mark}")
    return 0


def cmd_plotdata(ctx: Context) -> int:
    cfg = ctx.config
    written = 0
    if cfg.ibb_roster is not None:
        recs, _ = read_roster(cfg.ibb_roster, ListSource.IBB, cfg.ibb_list_year)
        dist = career_onset_distribution(recs)
        ctx.emit(_write_json(ctx.out_dir / "plot_onset.json", {
            "median_year": dist.median_year,
            "skipped": dist.skipped,
            "bins": [{"year": y, "count": c, "cumulative": k}
                     for y, c, k in zip(dist.years, dist.counts, dist.cumulative)],
        }))
        written += 1
    if cfg.aggregates is None and cfg.registry is None:
        if not written:
            raise HcrError("plotdata needs --ibb-roster and/or aggregates input")
        return 0
    aggs = _aggregates(ctx)
    entries = rank_countries(aggs, Metric.IBB_HCR, cfg.threshold, cfg.global_total)
    ctx.emit(_write_json(ctx.out_dir / "plot_cumulative_share.json", [
        {"rank": e.rank, "country_code": e.country_code, "value": e.value, "cumulative_share": e.cumulative_share}
        for e in entries
    ]))
    pairs = (
        ("plot_ibb_vs_ptop5.json", Metric.IBB_HCR, Metric.P_TOP5, aggs),
        ("plot_wos_vs_ibb.json", Metric.WOS_HCR, Metric.IBB_HCR,
         comparison_filter(aggs, cfg.min_wos, cfg.filter_exclusions)),
        ("plot_predicted_vs_reported.json", Metric.PREDICTED_WOS, Metric.WOS_HCR, aggs),
    )
    for name, xm, ym, subset in pairs:
        series = _series(subset, xm, ym, cfg)
        if len(series) == 0:
            continue
        scatter = rank_scatter(list(zip(series.labels, series.xs)), list(zip(series.labels, series.ys)))
        ctx.emit(_write_json(ctx.out_dir / name, [
            {"country_code": r.country_code, "x": r.value_left, "y": r.value_right,
             "rank_x": r.rank_left, "rank_y": r.rank_right, "deviation": r.deviation}
            for r in scatter
        ]))
    return 0


def cmd_fetch_indicators(ctx: Context, countries: Sequence[str]) -> int:
    cfg = ctx.config
    if not countries:
        if cfg.aggregates is None:
            raise HcrError("give --countries or --aggregates")
        countries = [a.country_code for a in read_aggregates(cfg.aggregates)]
    snap = _snapshot(ctx, countries)
    write_snapshot(snap, ctx.emit(ctx.out_dir / f"indicators_{snap.year}.csv"))
    ctx.emit(_write_json(ctx.out_dir / "indicator_coverage.json", {
        "year": snap.year,
        "missing": snap.missing,
        "sources": {k: v.value for k, v in sorted(snap.sources.items())},
    }))
    print(f"{len(snap.sources)} countries with data, missing: {', '.join(snap.missing) or 'none'}")
    return 0


# -- argument parsing -------------------------------------------------------------

def _csv_list(text: str) -> list[str]:
    return [t.strip().upper() for t in text.split(",") if t.strip()]


def _float_list(text: str) -> list[float]:
    return [float(t) for t in text.split(",") if t.strip()]


def _remap(text: str) -> dict[str, str]:
    out = {}
    for item in text.split(","):
        if not item.strip():
            continue
        src, _, dst = item.partition("=")
        if not dst:
            raise argparse.ArgumentTypeError(f"remap entries look like HKG=CHN, got {item!r}")
        out[src.strip().upper()] = dst.strip().upper()
    return out


def _common(sub: bool) -> argparse.ArgumentParser:
    d = argparse.SUPPRESS if sub else None
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", default=d, help="JSON file with RunConfig values")
    p.add_argument("--offline", action="store_true", default=argparse.SUPPRESS if sub else False,
                   help="use the indicator cache only")
    p.add_argument("--out-dir", default=argparse.SUPPRESS if sub else "out", help="output directory")
    p.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS if sub else False)
    return p


def _inputs(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("inputs")
    g.add_argument("--ibb-roster")
    g.add_argument("--wos-roster")
    g.add_argument("--metrics")
    g.add_argument("--registry")
    g.add_argument("--aliases")
    g.add_argument("--aggregates", help="country aggregates CSV (skips matching)")
    g.add_argument("--overrides", help="indicator override CSV")
    g.add_argument("--indicators", help="indicator cache CSV")
    g.add_argument("--ibb-list-year", type=int)
    g.add_argument("--wos-list-year", type=int)
    g.add_argument("--period")
    g.add_argument("--counting-mode", choices=[m.value for m in CountingMode])
    g.add_argument("--field-label")
    g.add_argument("--allow-unmatched", action="store_true", default=None)
    g.add_argument("--no-record-country-fallback", dest="use_record_country_on_unmatched",
                   action="store_false", default=None)
    g.add_argument("--remap", dest="country_remap", type=_remap, help="e.g. HKG=CHN")
    m = p.add_argument_group("model")
    m.add_argument("--x", type=float, help="lenient-tier percentile (default 5)")
    m.add_argument("--y", type=float, help="strict-tier percentile (default 0.05)")
    m.add_argument("--threshold", type=float)
    m.add_argument("--min-wos", type=int)
    m.add_argument("--pearson-exclude", dest="pearson_exclusions", type=_csv_list)
    m.add_argument("--spearman-exclude", dest="spearman_exclusions", type=_csv_list)
    m.add_argument("--filter-exclude", dest="filter_exclusions", type=_csv_list)
    m.add_argument("--global-total", type=float)
    m.add_argument("--indicator-year", type=int)


CONFIG_KEYS = (
    "ibb_roster", "wos_roster", "metrics", "registry", "aliases", "aggregates", "overrides", "indicators",
    "ibb_list_year", "wos_list_year", "period", "counting_mode", "field_label", "allow_unmatched",
    "use_record_country_on_unmatched", "country_remap", "x", "y", "threshold", "min_wos",
    "pearson_exclusions", "spearman_exclusions", "filter_exclusions", "global_total", "indicator_year",
    "x_metric", "y_metric", "apply_comparison_filter", "correlate_rounded", "y_grid",
)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hcr-assess",
        description="Country-level research assessment from highly cited researcher counts.",
        parents=[_common(sub=False)],
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subs = parser.add_subparsers(dest="command", required=True)
    common = _common(sub=True)

    def add(name: str, help_text: str) -> argparse.ArgumentParser:
        sp = subs.add_parser(name, help=help_text, parents=[common])
        _inputs(sp)
        return sp

    add("ingest", "validate input CSVs and write canonical copies with reject reports")
    add("aggregate", "match institutions and aggregate to country level")
    sp = add("validate", "Spearman and Pearson correlation between two country indicators")
    sp.add_argument("--x-metric", choices=[m.value for m in Metric], type=str.upper)
    sp.add_argument("--y-metric", choices=[m.value for m in Metric], type=str.upper)
    sp.add_argument("--comparison-filter", dest="apply_comparison_filter", action="store_true", default=None,
                    help="drop countries below --min-wos and those in --filter-exclude first")
    sp = add("predict-wos", "predict strict-list counts from lenient-list counts")
    sp.add_argument("--correlate-rounded", action="store_true", default=None,
                    help="correlate the rounded predictions instead of full precision")
    add("rank", "thresholded ranking with per-capita and per-GDP normalization")
    sp = add("sweep-y", "compare predictions across strict-tier percentiles")
    sp.add_argument("--y-grid", type=_float_list, help="comma-separated levels, e.g. 0.5,0.1,0.05,0.01")
    add("plotdata", "JSON arrays for the onset histogram, cumulative shares and rank scatters")
    sp = add("fetch-indicators", "population and GDP snapshot for a list of countries")
    sp.add_argument("--countries", type=_csv_list, default=[], help="comma-separated ISO alpha-3 codes")
    return parser


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    cfg = load_config(args.config)
    cli_values = {k: getattr(args, k) for k in CONFIG_KEYS if getattr(args, k, None) is not None}
    if args.offline:
        cli_values["offline"] = True
    return cfg.updated(cli_values)


COMMANDS = {
    "ingest": cmd_ingest,
    "aggregate": cmd_aggregate,
    "validate": cmd_validate,
    "predict-wos": cmd_predict_wos,
    "rank": cmd_rank,
    "sweep-y": cmd_sweep_y,
    "plotdata": cmd_plotdata,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _config_from_args(args)
        if args.command == "sweep-y" and not cfg.y_grid:
            parser.error("sweep-y needs a non-empty --y-grid")
        out_dir = Path(args.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        ctx = Context(cfg, out_dir, [])
        if args.command == "fetch-indicators":
            code = cmd_fetch_indicators(ctx, args.countries)
        else:
            code = COMMANDS[args.command](ctx)
        write_manifest(out_dir, args.command, cfg, ctx.outputs)
        return code
    except HcrError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
