"""Typed readers and writers for roster and institution-metrics CSV files.

Header mismatches are fatal (:class:`SchemaError`); row-level problems are
collected in an :class:`IngestReport` and the row is skipped.
"""

from __future__ import annotations

import csv
import math
import re
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Optional

from .errors import SchemaError

ROSTER_COLUMNS = (
    "researcher_id",
    "full_name",
    "raw_affiliation",
    "country_code",
    "first_pub_year",
    "list_source",
    "list_year",
)
METRICS_COLUMNS = (
    "institution_raw_name",
    "country_code",
    "period",
    "counting_mode",
    "field_label",
    "P",
    "p_top1",
    "p_top5",
    "p_top10",
    "p_top50",
)
DEFAULT_FIELD = "All sciences"
UNKNOWN_COUNTRY = "UNK"
MIN_YEAR = 1900

_COUNTRY_RE = re.compile(r"^[A-Z]{3}$")
_PERIOD_RE = re.compile(r"^(\d{4})-(\d{4})$")


class ListSource(str, Enum):
    IBB = "IBB"
    WOS = "WOS"


class CountingMode(str, Enum):
    FRACTIONAL = "FRACTIONAL"
    FULL = "FULL"


@dataclass(frozen=True)
class ResearcherRecord:
    researcher_id: str
    full_name: str
    raw_affiliation: str
    country_code: str
    first_pub_year: Optional[int]
    list_source: ListSource
    list_year: int


@dataclass(frozen=True)
class InstitutionMetrics:
    institution_raw_name: str
    country_code: str
    period: str
    counting_mode: CountingMode
    field_label: str
    P: float
    p_top1: float
    p_top5: float
    p_top10: float
    p_top50: float


@dataclass
class IngestReport:
    rows_read: int = 0
    rows_accepted: int = 0
    rejects: list[tuple[int, str]] = field(default_factory=list)
    # non-fatal rewrites applied to accepted rows, e.g. case folding
    notes: list[tuple[int, str]] = field(default_factory=list)

    def reject(self, line: int, reason: str) -> None:
        self.rejects.append((line, reason))

    def accept(self) -> None:
        self.rows_accepted += 1

    @property
    def balanced(self) -> bool:
        return self.rows_read == self.rows_accepted + len(self.rejects)


class RowError(ValueError):
    """Internal: one row failed validation; message is the reject reason."""


def parse_period(label: str) -> tuple[int, int]:
    """Return ``(first_year, last_year)`` for a 4-year window label like ``2006-2009``."""
    m = _PERIOD_RE.match(label.strip())
    if not m:
        raise ValueError("period is not a 4-year window")
    y1, y2 = int(m.group(1)), int(m.group(2))
    if y2 != y1 + 3:
        raise ValueError("period is not a 4-year window")
    return y1, y2


def normalize_country_code(raw: str) -> str:
    code = raw.strip().upper()
    if not _COUNTRY_RE.match(code):
        raise ValueError(f"invalid country_code {raw!r}")
    return code


def format_number(x: float) -> str:
    """Shortest text that reads back to the same float; integral values drop the ``.0``."""
    if math.isfinite(x) and x.is_integer() and abs(x) < 1e15:
        return str(int(x))
    return repr(float(x))


def _open_checked(path: Path, expected: tuple[str, ...]):
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such file: {path}")
    fh = path.open(newline="", encoding="utf-8-sig")
    reader = csv.reader(fh)
    header = next(reader, None)
    if header is None:
        fh.close()
        raise SchemaError(f"{path}: empty file, expected header {','.join(expected)}")
    header = [h.strip() for h in header]
    if tuple(header) != expected:
        fh.close()
        raise SchemaError(
            f"{path}: header mismatch; expected {','.join(expected)}, got {','.join(header)}"
        )
    return fh, reader


def _parse_int(text: str, column: str) -> int:
    try:
        return int(text.strip())
    except ValueError:
        raise RowError(f"invalid integer in {column}") from None


def _parse_nonneg(text: str, column: str) -> float:
    try:
        value = float(text.strip())
    except ValueError:
        raise RowError(f"invalid number in {column}") from None
    if not math.isfinite(value):
        raise RowError(f"invalid number in {column}")
    if value < 0:
        raise RowError(f"negative value in {column}")
    return value


def _roster_row(row: list[str], source: ListSource, list_year: int, notes: list[str]) -> ResearcherRecord:
    rid, name, affil, country, first_year, row_source, row_year = (c.strip() for c in row)
    if not rid:
        raise RowError("missing researcher_id")
    try:
        code = normalize_country_code(country)
    except ValueError as exc:
        raise RowError(str(exc)) from None
    if code != country:
        notes.append(f"country_code {country!r} normalized to {code!r}")
    if row_source.upper() != source.value:
        raise RowError(f"list_source {row_source!r} does not match {source.value}")
    if _parse_int(row_year, "list_year") != list_year:
        raise RowError(f"list_year {row_year!r} does not match {list_year}")
    year: Optional[int] = None
    if first_year:
        year = _parse_int(first_year, "first_pub_year")
        if not MIN_YEAR <= year <= list_year:
            raise RowError("year out of range")
    return ResearcherRecord(rid, name, affil, code, year, source, list_year)


def read_roster(
    path: Path | str, source: ListSource | str, list_year: int
) -> tuple[list[ResearcherRecord], IngestReport]:
    """Read a roster CSV; rows violating record invariants go to the report."""
    source = source if isinstance(source, ListSource) else ListSource(source.upper())
    records: list[ResearcherRecord] = []
    report = IngestReport()
    fh, reader = _open_checked(Path(path), ROSTER_COLUMNS)
    with fh:
        for row in reader:
            if not any(c.strip() for c in row):
                continue
            report.rows_read += 1
            line = reader.line_num
            if len(row) != len(ROSTER_COLUMNS):
                report.reject(line, "wrong number of fields")
                continue
            notes: list[str] = []
            try:
                rec = _roster_row(row, source, list_year, notes)
            except RowError as exc:
                report.reject(line, str(exc))
                continue
            report.notes.extend((line, n) for n in notes)
            records.append(rec)
            report.accept()
    return records, report


def _metrics_row(row: list[str], notes: list[str]) -> InstitutionMetrics:
    name, country, period, mode, field_label = (c.strip() for c in row[:5])
    if not name:
        raise RowError("missing institution_raw_name")
    try:
        code = normalize_country_code(country)
    except ValueError as exc:
        raise RowError(str(exc)) from None
    if code != country:
        notes.append(f"country_code {country!r} normalized to {code!r}")
    try:
        parse_period(period)
    except ValueError as exc:
        raise RowError(str(exc)) from None
    try:
        counting = CountingMode(mode.upper())
    except ValueError:
        raise RowError(f"invalid counting_mode {mode!r}") from None
    values = [_parse_nonneg(text, col) for text, col in zip(row[5:], METRICS_COLUMNS[5:])]
    P, p1, p5, p10, p50 = values
    if not (p1 <= p5 <= p10 <= p50 <= P):
        raise RowError("percentile nesting violated")
    return InstitutionMetrics(name, code, period, counting, field_label or DEFAULT_FIELD, P, p1, p5, p10, p50)


def read_metrics(path: Path | str) -> tuple[list[InstitutionMetrics], IngestReport]:
    """Read an institution-metrics CSV (one row per institution, period, mode and field)."""
    out: list[InstitutionMetrics] = []
    report = IngestReport()
    fh, reader = _open_checked(Path(path), METRICS_COLUMNS)
    with fh:
        for row in reader:
            if not any(c.strip() for c in row):
                continue
            report.rows_read += 1
            line = reader.line_num
            if len(row) != len(METRICS_COLUMNS):
                report.reject(line, "wrong number of fields")
                continue
            notes: list[str] = []
            try:
                m = _metrics_row(row, notes)
            except RowError as exc:
                report.reject(line, str(exc))
                continue
            report.notes.extend((line, n) for n in notes)
            out.append(m)
            report.accept()
    return out, report


def write_roster(records: Iterable[ResearcherRecord], path: Path | str) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ROSTER_COLUMNS)
        for r in records:
            w.writerow([
                r.researcher_id,
                r.full_name,
                r.raw_affiliation,
                r.country_code,
                "" if r.first_pub_year is None else r.first_pub_year,
                r.list_source.value,
                r.list_year,
            ])


def write_metrics(rows: Iterable[InstitutionMetrics], path: Path | str) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(METRICS_COLUMNS)
        for m in rows:
            w.writerow([
                m.institution_raw_name,
                m.country_code,
                m.period,
                m.counting_mode.value,
                m.field_label,
                *(format_number(v) for v in (m.P, m.p_top1, m.p_top5, m.p_top10, m.p_top50)),
            ])


def write_report(report: IngestReport, path: Path | str) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["line", "kind", "message"])
        for line, reason in report.rejects:
            w.writerow([line, "reject", reason])
        for line, note in report.notes:
            w.writerow([line, "note", note])
