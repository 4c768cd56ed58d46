"""Population and GDP denominators from the World Bank indicator API.

Live responses are validated and merged into a CSV cache; offline mode reads
only the cache. Override rows (countries the World Bank does not cover, such
as Taiwan) win in both modes.
"""

from __future__ import annotations

import csv
import logging
import os
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Optional

import requests

from .errors import SchemaError
from .ingest import format_number, normalize_country_code

logger = logging.getLogger(__name__)

POPULATION = "SP.POP.TOTL"
GDP_USD = "NY.GDP.MKTP.CD"
BASE_URL_ENV = "HCR_WORLDBANK_API_BASE"
DEFAULT_BASE_URL = "https://api.worldbank.org/v2"
CACHE_COLUMNS = ("country_code", "year", "population", "gdp_usd")
TIMEOUT = 30


class Source(str, Enum):
    LIVE = "LIVE"
    CACHE = "CACHE"
    OVERRIDE = "OVERRIDE"


class Mode(str, Enum):
    LIVE = "LIVE"
    OFFLINE = "OFFLINE"


@dataclass
class IndicatorSnapshot:
    year: int
    population: dict[str, float] = field(default_factory=dict)
    gdp_usd: dict[str, float] = field(default_factory=dict)
    sources: dict[str, Source] = field(default_factory=dict)
    missing: list[str] = field(default_factory=list)
    fetched_at: Optional[datetime] = None

    def source_of(self, country_code: str) -> Optional[Source]:
        return self.sources.get(country_code)

    def same_data(self, other: "IndicatorSnapshot") -> bool:
        """Equality ignoring ``fetched_at``."""
        return (
            self.year == other.year
            and self.population == other.population
            and self.gdp_usd == other.gdp_usd
            and self.sources == other.sources
            and self.missing == other.missing
        )


def shipped_snapshot_path() -> Path:
    return Path(str(resources.files("hcr_assess") / "data" / "worldbank_2019.csv"))


def shipped_overrides_path() -> Path:
    return Path(str(resources.files("hcr_assess") / "data" / "overrides.csv"))


def _positive(text: str, what: str, where: str) -> Optional[float]:
    if not text:
        return None
    try:
        value = float(text)
    except ValueError:
        raise SchemaError(f"{where}: invalid {what} {text!r}") from None
    if not value > 0:
        raise SchemaError(f"{where}: {what} must be positive")
    return value


def read_table(path: Path | str) -> dict[tuple[str, int], tuple[Optional[float], Optional[float]]]:
    """Read a cache/override CSV into ``{(country, year): (population, gdp_usd)}``."""
    path = Path(path)
    out = {}
    with path.open(newline="", encoding="utf-8-sig") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != CACHE_COLUMNS:
            raise SchemaError(f"{path}: header mismatch; expected {','.join(CACHE_COLUMNS)}")
        for row in reader:
            if not any(c.strip() for c in row):
                continue
            where = f"{path}:{reader.line_num}"
            if len(row) != len(CACHE_COLUMNS):
                raise SchemaError(f"{where}: wrong number of fields")
            code, year, pop, gdp = (c.strip() for c in row)
            try:
                key = (normalize_country_code(code), int(year))
            except ValueError as exc:
                raise SchemaError(f"{where}: {exc}") from None
            out[key] = (_positive(pop, "population", where), _positive(gdp, "gdp_usd", where))
    return out


def write_table(rows: Mapping[tuple[str, int], tuple[Optional[float], Optional[float]]], path: Path | str) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CACHE_COLUMNS)
        for (code, year) in sorted(rows):
            pop, gdp = rows[(code, year)]
            w.writerow([
                code,
                year,
                "" if pop is None else format_number(pop),
                "" if gdp is None else format_number(gdp),
            ])


def write_snapshot(snapshot: IndicatorSnapshot, path: Path | str) -> None:
    codes = set(snapshot.population) | set(snapshot.gdp_usd)
    write_table(
        {(c, snapshot.year): (snapshot.population.get(c), snapshot.gdp_usd.get(c)) for c in codes},
        path,
    )


def read_snapshot(path: Path | str, year: int, countries: Optional[Iterable[str]] = None) -> IndicatorSnapshot:
    table = read_table(path)
    wanted = None if countries is None else set(countries)
    snap = IndicatorSnapshot(year)
    for (code, y), (pop, gdp) in sorted(table.items()):
        if y != year or (wanted is not None and code not in wanted):
            continue
        _store(snap, code, pop, gdp, Source.CACHE)
    return snap


def _store(snap: IndicatorSnapshot, code: str, pop: Optional[float], gdp: Optional[float], source: Source) -> None:
    if pop is not None:
        snap.population[code] = pop
    if gdp is not None:
        snap.gdp_usd[code] = gdp
    if pop is not None or gdp is not None:
        snap.sources[code] = source


def _fetch_indicator(base_url: str, indicator: str, countries: list[str], year: int) -> dict[str, float]:
    url = f"{base_url.rstrip('/')}/country/{';'.join(countries)}/indicator/{indicator}"
    params = {"date": str(year), "format": "json", "per_page": "500"}
    values: dict[str, float] = {}
    page, pages = 1, 1
    while page <= pages:
        resp = requests.get(url, params={**params, "page": str(page)}, timeout=TIMEOUT)
        resp.raise_for_status()
        payload = resp.json()
        if not isinstance(payload, list) or len(payload) < 2 or payload[1] is None:
            # the API reports bad codes as a one-element list holding a message
            raise ValueError(f"unexpected World Bank response for {indicator}: {str(payload)[:200]}")
        pages = int(payload[0].get("pages", 1) or 1)
        for item in payload[1]:
            value = item.get("value")
            code = item.get("countryiso3code") or (item.get("country") or {}).get("id", "")
            if value is None or not code:
                continue
            if str(item.get("date")) != str(year):
                raise ValueError(f"World Bank returned {indicator} for {item.get('date')}, wanted {year}")
            value = float(value)
            if not value > 0:
                raise ValueError(f"World Bank returned non-positive {indicator} for {code}")
            values[code.upper()] = value
        page += 1
    return values


def fetch_indicators(
    countries: Iterable[str],
    year: int = 2019,
    mode: Mode | str = Mode.OFFLINE,
    cache_path: Path | str | None = None,
    override_path: Path | str | None = None,
    base_url: Optional[str] = None,
) -> IndicatorSnapshot:
    """Population and GDP for ``countries`` in ``year``.

    LIVE failures fall back to the cache with a warning. Countries absent
    from every source end up in ``snapshot.missing``.
    """
    mode = mode if isinstance(mode, Mode) else Mode(mode.upper())
    codes = sorted({normalize_country_code(c) for c in countries})
    cache_path = Path(cache_path) if cache_path is not None else shipped_snapshot_path()
    override_path = Path(override_path) if override_path is not None else shipped_overrides_path()

    snap: Optional[IndicatorSnapshot] = None
    if mode is Mode.LIVE:
        base = base_url or os.environ.get(BASE_URL_ENV, DEFAULT_BASE_URL)
        try:
            pops = _fetch_indicator(base, POPULATION, codes, year)
            gdps = _fetch_indicator(base, GDP_USD, codes, year)
        except (requests.RequestException, ValueError) as exc:
            logger.warning("World Bank API unavailable (%s); using cache %s", exc, cache_path)
        else:
            snap = IndicatorSnapshot(year, fetched_at=datetime.now(timezone.utc))
            for code in codes:
                _store(snap, code, pops.get(code), gdps.get(code), Source.LIVE)
            table = read_table(cache_path) if cache_path.is_file() else {}
            for code in codes:
                if code in snap.sources:
                    table[(code, year)] = (snap.population.get(code), snap.gdp_usd.get(code))
            write_table(table, cache_path)
    if snap is None:
        if not cache_path.is_file():
            raise FileNotFoundError(f"no indicator cache at {cache_path}")
        snap = read_snapshot(cache_path, year, codes)

    if override_path.is_file():
        for (code, y), (pop, gdp) in sorted(read_table(override_path).items()):
            if y == year and code in codes:
                snap.population.pop(code, None)
                snap.gdp_usd.pop(code, None)
                _store(snap, code, pop, gdp, Source.OVERRIDE)
    snap.missing = [c for c in codes if c not in snap.population or c not in snap.gdp_usd]
    for code in snap.missing:
        logger.warning("no complete %d indicators for %s", year, code)
    return snap
