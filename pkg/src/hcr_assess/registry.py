"""Institution name resolution and aggregation to country level."""

from __future__ import annotations

import csv
import logging
import unicodedata
from collections import defaultdict
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

from rapidfuzz.distance import Levenshtein

from .errors import AggregationError, AmbiguousMatchError, SchemaError
from .ingest import (
    DEFAULT_FIELD,
    UNKNOWN_COUNTRY,
    CountingMode,
    InstitutionMetrics,
    ListSource,
    ResearcherRecord,
    format_number,
    normalize_country_code,
)

logger = logging.getLogger(__name__)

REGISTRY_COLUMNS = ("institution_id", "canonical_name", "country_code", "kind")
ALIAS_COLUMNS = ("pattern", "target_institution_id", "rule_kind", "fuzzy_budget")
AUDIT_COLUMNS = ("raw_affiliation", "outcome", "institution_id", "distance")
AGGREGATE_COLUMNS = (
    "country_code",
    "period",
    "ibb_hcr",
    "wos_hcr",
    "P",
    "p_top1",
    "p_top5",
    "p_top10",
    "p_top50",
    "matched_institutions",
)

DEFAULT_FUZZY_BUDGET = Fraction(1, 10)
MAX_FUZZY_BUDGET = Fraction(1, 5)


def normalize_name(raw: str) -> str:
    """Lowercase, strip diacritics, turn punctuation into spaces, collapse whitespace."""
    text = unicodedata.normalize("NFKD", raw).lower()
    # lowercasing can introduce new combining marks (e.g. dotted capital I)
    text = unicodedata.normalize("NFKD", text)
    chars = []
    for ch in text:
        if unicodedata.combining(ch):
            continue
        chars.append(ch if ch.isalnum() else " ")
    return " ".join("".join(chars).split())


class InstitutionKind(str, Enum):
    UNIVERSITY = "UNIVERSITY"
    HOSPITAL = "HOSPITAL"
    OTHER = "OTHER"


class RuleKind(str, Enum):
    EXACT = "EXACT"
    DEPARTMENT_OF = "DEPARTMENT_OF"
    FUZZY = "FUZZY"


class MatchOutcome(str, Enum):
    MATCHED = "MATCHED"
    UNMATCHED = "UNMATCHED"
    AMBIGUOUS = "AMBIGUOUS"


@dataclass(frozen=True)
class CanonicalInstitution:
    institution_id: str
    canonical_name: str
    country_code: str
    kind: InstitutionKind


@dataclass(frozen=True)
class AliasRule:
    pattern: str
    target_institution_id: str
    rule_kind: RuleKind
    fuzzy_budget: Optional[Fraction] = None

    def __post_init__(self):
        object.__setattr__(self, "pattern", normalize_name(self.pattern))
        if self.rule_kind is RuleKind.FUZZY:
            budget = DEFAULT_FUZZY_BUDGET if self.fuzzy_budget is None else Fraction(self.fuzzy_budget)
            if not 0 <= budget <= MAX_FUZZY_BUDGET:
                raise ValueError(f"fuzzy budget {budget} outside [0, {MAX_FUZZY_BUDGET}]")
            object.__setattr__(self, "fuzzy_budget", budget)
        elif self.fuzzy_budget is not None:
            raise ValueError(f"{self.rule_kind.value} rule cannot carry a fuzzy budget")


@dataclass(frozen=True)
class MatchResult:
    outcome: MatchOutcome
    institution_id: Optional[str] = None
    candidates: tuple[str, ...] = ()
    distance: Optional[Fraction] = None
    rule_kind: Optional[RuleKind] = None


UNMATCHED = MatchResult(MatchOutcome.UNMATCHED)


class Registry:
    """Canonical institutions plus alias rules. Treat as immutable once built.

    Canonical names act as implicit EXACT rules and as fuzzy targets at
    ``default_fuzzy_budget``.
    """

    def __init__(
        self,
        institutions: Iterable[CanonicalInstitution],
        rules: Iterable[AliasRule] = (),
        default_fuzzy_budget: Fraction = DEFAULT_FUZZY_BUDGET,
    ):
        self.institutions: dict[str, CanonicalInstitution] = {}
        for inst in institutions:
            if inst.institution_id in self.institutions:
                raise SchemaError(f"duplicate institution_id {inst.institution_id!r}")
            if not inst.canonical_name.strip():
                raise SchemaError(f"empty canonical_name for {inst.institution_id!r}")
            self.institutions[inst.institution_id] = inst
        self.rules = tuple(rules)
        for rule in self.rules:
            if rule.target_institution_id not in self.institutions:
                raise SchemaError(f"alias {rule.pattern!r} targets unknown institution {rule.target_institution_id!r}")
        self.default_fuzzy_budget = Fraction(default_fuzzy_budget)
        if not 0 <= self.default_fuzzy_budget <= MAX_FUZZY_BUDGET:
            raise ValueError("default fuzzy budget outside [0, 0.2]")

        self._exact: dict[str, set[str]] = defaultdict(set)
        self._department: list[tuple[tuple[str, ...], str]] = []
        self._fuzzy: list[tuple[str, str, Fraction]] = []
        for inst in self.institutions.values():
            key = normalize_name(inst.canonical_name)
            self._exact[key].add(inst.institution_id)
            self._fuzzy.append((key, inst.institution_id, self.default_fuzzy_budget))
        for rule in self.rules:
            if rule.rule_kind is RuleKind.EXACT:
                self._exact[rule.pattern].add(rule.target_institution_id)
            elif rule.rule_kind is RuleKind.DEPARTMENT_OF:
                self._department.append((tuple(rule.pattern.split()), rule.target_institution_id))
            else:
                self._fuzzy.append((rule.pattern, rule.target_institution_id, rule.fuzzy_budget))
        self._cache: dict[str, MatchResult] = {}

    def __getitem__(self, institution_id: str) -> CanonicalInstitution:
        return self.institutions[institution_id]

    def resolve(self, raw_affiliation: str) -> MatchResult:
        key = normalize_name(raw_affiliation)
        hit = self._cache.get(key)
        if hit is None:
            hit = self._cache[key] = self._resolve_normalized(key)
        return hit

    def _resolve_normalized(self, key: str) -> MatchResult:
        if not key:
            return UNMATCHED
        exact = self._exact.get(key)
        if exact:
            return _decide(exact, RuleKind.EXACT)

        tokens = key.split()
        best_len = 0
        dept: set[str] = set()
        for pattern, target in self._department:
            if len(pattern) >= best_len and _contains_run(tokens, pattern):
                if len(pattern) > best_len:
                    best_len, dept = len(pattern), set()
                dept.add(target)
        if dept:
            return _decide(dept, RuleKind.DEPARTMENT_OF)

        best: Optional[Fraction] = None
        fuzzy: set[str] = set()
        for pattern, target, budget in self._fuzzy:
            longest = max(len(pattern), len(key))
            d = Fraction(Levenshtein.distance(pattern, key), longest)
            if d > budget:
                continue
            if best is None or d < best:
                best, fuzzy = d, set()
            if d == best:
                fuzzy.add(target)
        if fuzzy:
            return _decide(fuzzy, RuleKind.FUZZY, best)
        return UNMATCHED


def _contains_run(tokens: Sequence[str], pattern: Sequence[str]) -> bool:
    n = len(pattern)
    if n == 0:
        return False
    return any(tuple(tokens[i:i + n]) == tuple(pattern) for i in range(len(tokens) - n + 1))


def _decide(targets: set[str], kind: RuleKind, distance: Optional[Fraction] = None) -> MatchResult:
    if len(targets) == 1:
        (target,) = targets
        return MatchResult(MatchOutcome.MATCHED, target, (target,), distance, kind)
    return MatchResult(MatchOutcome.AMBIGUOUS, None, tuple(sorted(targets)), distance, kind)


def resolve(raw_affiliation: str, registry: Registry) -> MatchResult:
    return registry.resolve(raw_affiliation)


def _header(reader, path: Path, expected: tuple[str, ...]) -> None:
    header = next(reader, None)
    if header is None or tuple(h.strip() for h in header) != expected:
        raise SchemaError(f"{path}: header mismatch; expected {','.join(expected)}")


def load_registry(
    registry_path: Path | str,
    alias_path: Path | str | None = None,
    default_fuzzy_budget: Fraction = DEFAULT_FUZZY_BUDGET,
) -> Registry:
    registry_path = Path(registry_path)
    institutions = []
    with registry_path.open(newline="", encoding="utf-8-sig") as fh:
        reader = csv.reader(fh)
        _header(reader, registry_path, REGISTRY_COLUMNS)
        for row in reader:
            if not any(c.strip() for c in row):
                continue
            try:
                iid, name, country, kind = (c.strip() for c in row)
                institutions.append(
                    CanonicalInstitution(iid, name, normalize_country_code(country), InstitutionKind(kind.upper()))
                )
            except ValueError as exc:
                raise SchemaError(f"{registry_path}:{reader.line_num}: {exc}") from None
    rules = []
    if alias_path is not None:
        alias_path = Path(alias_path)
        with alias_path.open(newline="", encoding="utf-8-sig") as fh:
            reader = csv.reader(fh)
            _header(reader, alias_path, ALIAS_COLUMNS)
            for row in reader:
                if not any(c.strip() for c in row):
                    continue
                try:
                    pattern, target, kind, budget = (c.strip() for c in row)
                    rules.append(AliasRule(pattern, target, RuleKind(kind.upper()), Fraction(budget) if budget else None))
                except ValueError as exc:
                    raise SchemaError(f"{alias_path}:{reader.line_num}: {exc}") from None
    return Registry(institutions, rules, default_fuzzy_budget)


@dataclass(frozen=True)
class CountryAggregate:
    country_code: str
    period: str
    ibb_hcr: int = 0
    wos_hcr: Optional[int] = None
    P: Optional[float] = None
    p_top1: Optional[float] = None
    p_top5: Optional[float] = None
    p_top10: Optional[float] = None
    p_top50: Optional[float] = None
    matched_institutions: int = 0

    def nested(self) -> bool:
        present = [v for v in (self.p_top1, self.p_top5, self.p_top10, self.p_top50, self.P) if v is not None]
        return all(a <= b for a, b in zip(present, present[1:]))


@dataclass(frozen=True)
class AggregationPolicy:
    period: str = "2006-2009"
    counting_mode: Optional[CountingMode] = CountingMode.FRACTIONAL
    field_label: Optional[str] = DEFAULT_FIELD
    use_record_country_on_unmatched: bool = True
    allow_unmatched: bool = False
    # e.g. {"HKG": "CHN"} to fold Hong Kong into China
    country_remap: Mapping[str, str] = field(default_factory=dict)


@dataclass(frozen=True)
class AuditRow:
    raw_affiliation: str
    outcome: MatchOutcome
    institution_id: Optional[str]
    distance: Optional[Fraction]


@dataclass
class AggregationCounts:
    researchers: int = 0
    matched: int = 0
    fallback: int = 0
    hospital_excluded: int = 0
    dropped: int = 0
    ambiguous: int = 0
    metrics_rows_used: int = 0
    metrics_rows_unmatched: int = 0


@dataclass
class AggregationResult:
    aggregates: list[CountryAggregate]
    audit: list[AuditRow]
    counts: AggregationCounts


def aggregate_country(
    records: Sequence[ResearcherRecord],
    metrics: Sequence[InstitutionMetrics],
    registry: Registry,
    policy: AggregationPolicy = AggregationPolicy(),
) -> AggregationResult:
    """Roll researcher counts and institution metrics up to countries.

    Researchers at HOSPITAL institutions are not counted. Unmatched
    researchers fall back to their record's country when the policy allows.
    Metrics are summed per country over matched non-hospital institutions.
    """
    remap = dict(policy.country_remap)

    def country_of(code: str) -> str:
        return remap.get(code, code)

    audit: dict[str, AuditRow] = {}

    def match(raw: str) -> MatchResult:
        res = registry.resolve(raw)
        if raw not in audit:
            audit[raw] = AuditRow(raw, res.outcome, res.institution_id, res.distance)
        return res

    counts = AggregationCounts(researchers=len(records))
    hcr: dict[str, dict[ListSource, int]] = defaultdict(lambda: defaultdict(int))
    ambiguous: list[str] = []
    for rec in records:
        res = match(rec.raw_affiliation)
        if res.outcome is MatchOutcome.AMBIGUOUS:
            counts.ambiguous += 1
            ambiguous.append(rec.raw_affiliation)
        if res.outcome is MatchOutcome.MATCHED:
            inst = registry[res.institution_id]
            if inst.kind is InstitutionKind.HOSPITAL:
                counts.hospital_excluded += 1
                continue
            hcr[country_of(inst.country_code)][rec.list_source] += 1
            counts.matched += 1
        elif policy.use_record_country_on_unmatched and rec.country_code != UNKNOWN_COUNTRY:
            hcr[country_of(rec.country_code)][rec.list_source] += 1
            counts.fallback += 1
        else:
            counts.dropped += 1
    if ambiguous and not policy.allow_unmatched:
        raise AmbiguousMatchError(sorted(set(ambiguous)))

    periods = {m.period for m in metrics}
    if metrics and policy.period not in periods:
        raise AggregationError(f"period {policy.period} absent from metrics (have {', '.join(sorted(periods))})")

    sums: dict[str, list[float]] = defaultdict(lambda: [0.0] * 5)
    members: dict[str, set[str]] = defaultdict(set)
    for m in metrics:
        if m.period != policy.period:
            continue
        if policy.counting_mode is not None and m.counting_mode is not policy.counting_mode:
            continue
        if policy.field_label is not None and m.field_label != policy.field_label:
            continue
        res = match(m.institution_raw_name)
        if res.outcome is not MatchOutcome.MATCHED:
            counts.metrics_rows_unmatched += 1
            continue
        inst = registry[res.institution_id]
        if inst.kind is InstitutionKind.HOSPITAL:
            continue
        code = country_of(inst.country_code)
        acc = sums[code]
        for i, v in enumerate((m.P, m.p_top1, m.p_top5, m.p_top10, m.p_top50)):
            acc[i] += v
        members[code].add(inst.institution_id)
        counts.metrics_rows_used += 1

    has_wos = any(r.list_source is ListSource.WOS for r in records)
    countries = sorted(set(hcr) | set(sums))
    if not countries:
        raise AggregationError("no country has researchers or metrics for the requested period")
    out = []
    for code in countries:
        by_src = hcr.get(code, {})
        s = sums.get(code)
        out.append(CountryAggregate(
            country_code=code,
            period=policy.period,
            ibb_hcr=by_src.get(ListSource.IBB, 0),
            wos_hcr=by_src.get(ListSource.WOS, 0) if has_wos else None,
            P=s[0] if s else None,
            p_top1=s[1] if s else None,
            p_top5=s[2] if s else None,
            p_top10=s[3] if s else None,
            p_top50=s[4] if s else None,
            matched_institutions=len(members.get(code, ())),
        ))
    if counts.fallback:
        logger.info("%d researchers counted by record country (no institution match)", counts.fallback)
    rows = [audit[k] for k in sorted(audit)]
    return AggregationResult(out, rows, counts)


def _opt_num(v: Optional[float]) -> str:
    return "" if v is None else format_number(v)


def write_aggregates(aggregates: Iterable[CountryAggregate], path: Path | str) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(AGGREGATE_COLUMNS)
        for a in aggregates:
            w.writerow([
                a.country_code,
                a.period,
                a.ibb_hcr,
                "" if a.wos_hcr is None else a.wos_hcr,
                *(_opt_num(v) for v in (a.P, a.p_top1, a.p_top5, a.p_top10, a.p_top50)),
                a.matched_institutions,
            ])


def read_aggregates(path: Path | str) -> list[CountryAggregate]:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such file: {path}")
    out = []
    with path.open(newline="", encoding="utf-8-sig") as fh:
        reader = csv.reader(fh)
        _header(reader, path, AGGREGATE_COLUMNS)
        for row in reader:
            if not any(c.strip() for c in row):
                continue
            cells = [c.strip() for c in row]
            if len(cells) != len(AGGREGATE_COLUMNS):
                raise SchemaError(f"{path}:{reader.line_num}: wrong number of fields")
            try:
                opt = [float(c) if c else None for c in cells[4:9]]
                agg = CountryAggregate(
                    country_code=normalize_country_code(cells[0]),
                    period=cells[1],
                    ibb_hcr=int(cells[2]) if cells[2] else 0,
                    wos_hcr=int(cells[3]) if cells[3] else None,
                    P=opt[0], p_top1=opt[1], p_top5=opt[2], p_top10=opt[3], p_top50=opt[4],
                    matched_institutions=int(cells[9]) if cells[9] else 0,
                )
            except ValueError as exc:
                raise SchemaError(f"{path}:{reader.line_num}: {exc}") from None
            if not agg.nested():
                raise SchemaError(f"{path}:{reader.line_num}: percentile nesting violated")
            out.append(agg)
    return out


def write_audit(rows: Iterable[AuditRow], path: Path | str) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(AUDIT_COLUMNS)
        for r in rows:
            w.writerow([
                r.raw_affiliation,
                r.outcome.value,
                r.institution_id or "",
                "" if r.distance is None else format_number(float(r.distance)),
            ])
