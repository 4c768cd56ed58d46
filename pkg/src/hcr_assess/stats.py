"""Pearson and Spearman correlation with two-sided p-values.

p-values come from the Student t approximation, evaluated through the
regularized incomplete beta function in log space so that values far below
the double-precision range stay representable as ``log_p``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from .errors import ConstantSeriesError, InsufficientDataError

EXACT_PERMUTATION_MAX_N = 10


class Method(str, Enum):
    PEARSON = "PEARSON"
    SPEARMAN = "SPEARMAN"


@dataclass(frozen=True)
class PairedSeries:
    labels: tuple[str, ...]
    xs: tuple[float, ...]
    ys: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(self.labels))
        object.__setattr__(self, "xs", tuple(float(v) for v in self.xs))
        object.__setattr__(self, "ys", tuple(float(v) for v in self.ys))
        if not len(self.labels) == len(self.xs) == len(self.ys):
            raise ValueError("labels, xs and ys must have equal lengths")
        if len(set(self.labels)) != len(self.labels):
            raise ValueError("labels must be unique")

    def __len__(self) -> int:
        return len(self.labels)

    def without(self, exclude: Iterable[str]) -> tuple["PairedSeries", tuple[str, ...]]:
        """Drop labels in ``exclude``; returns the reduced series and the labels actually dropped."""
        drop = set(exclude)
        keep = [i for i, lab in enumerate(self.labels) if lab not in drop]
        dropped = tuple(lab for lab in self.labels if lab in drop)
        reduced = PairedSeries(
            tuple(self.labels[i] for i in keep),
            tuple(self.xs[i] for i in keep),
            tuple(self.ys[i] for i in keep),
        )
        return reduced, dropped


@dataclass(frozen=True)
class CorrelationResult:
    method: Method
    r: float
    n: int
    p_two_sided: float
    log_p: float
    excluded: tuple[str, ...] = ()
    p_method: str = "t"

    @property
    def log10_p(self) -> float:
        return self.log_p / math.log(10.0)


def rank_vector(values: Sequence[float]) -> list[float]:
    """Descending ranks (1 = largest); ties share the mean of the ranks they span."""
    n = len(values)
    order = sorted(range(n), key=lambda i: -values[i])
    ranks = [0.0] * n
    i = 0
    while i < n:
        j = i
        while j + 1 < n and values[order[j + 1]] == values[order[i]]:
            j += 1
        avg = (i + j) / 2.0 + 1.0
        for k in range(i, j + 1):
            ranks[order[k]] = avg
        i = j + 1
    return ranks


def _softplus(u: float) -> float:
    if u > 0:
        return u + math.log1p(math.exp(-u))
    return math.log1p(math.exp(u))


def _betacf(a: float, b: float, x: float, eps: float = 1e-16, max_iter: int = 10_000) -> float:
    """Continued fraction for the incomplete beta function (modified Lentz)."""
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            return h
    raise ArithmeticError("incomplete beta continued fraction did not converge")


def log_t_sf_two_sided(t: float, df: float) -> float:
    """Natural log of ``2 * P(T >= |t|)`` for Student's t with ``df`` degrees of freedom."""
    if df <= 0:
        raise ValueError("df must be positive")
    t = abs(t)
    if t == 0.0:
        return 0.0
    if math.isinf(t):
        return -math.inf
    a, b = df / 2.0, 0.5
    # u = log(t^2/df); x = df/(df+t^2) = 1/(1+e^u) handled in logs to survive t ~ 1e300
    u = 2.0 * math.log(t) - math.log(df)
    log_x = -_softplus(u)
    log_1mx = -_softplus(-u)
    log_beta = math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b)
    x = math.exp(log_x)
    if x < (a + 1.0) / (a + b + 2.0):
        # p = I_x(a, b)
        return a * log_x + b * log_1mx - log_beta - math.log(a) + math.log(_betacf(a, b, x))
    # p = 1 - I_{1-x}(b, a)
    y = math.exp(log_1mx)
    comp = math.exp(b * log_1mx + a * log_x - log_beta - math.log(b)) * _betacf(b, a, y)
    return math.log1p(-comp)


def t_sf_two_sided(t: float, df: float) -> float:
    return math.exp(log_t_sf_two_sided(t, df))


def _log_p_from_r(r: float, n: int) -> float:
    if abs(r) >= 1.0:
        return -math.inf
    df = n - 2
    # t = r*sqrt(df/(1-r^2)) with 1-r^2 factored to keep precision near |r| = 1
    t = abs(r) * math.sqrt(df / ((1.0 - r) * (1.0 + r)))
    return log_t_sf_two_sided(t, df)


def _pearson_r(xs: Sequence[float], ys: Sequence[float]) -> float:
    n = len(xs)
    mx = math.fsum(xs) / n
    my = math.fsum(ys) / n
    dx = [x - mx for x in xs]
    dy = [y - my for y in ys]
    sxx = math.fsum(d * d for d in dx)
    syy = math.fsum(d * d for d in dy)
    if sxx == 0.0 or syy == 0.0:
        raise ConstantSeriesError("constant series")
    sxy = math.fsum(a * b for a, b in zip(dx, dy))
    r = sxy / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, r))


def _prepare(series: PairedSeries, exclude: Iterable[str]) -> tuple[PairedSeries, tuple[str, ...]]:
    reduced, dropped = series.without(exclude)
    if len(reduced) < 3:
        raise InsufficientDataError(f"need at least 3 observations after exclusions, have {len(reduced)}")
    return reduced, dropped


def pearson(series: PairedSeries, exclude: Iterable[str] = ()) -> CorrelationResult:
    s, dropped = _prepare(series, exclude)
    r = _pearson_r(s.xs, s.ys)
    log_p = _log_p_from_r(r, len(s))
    return CorrelationResult(Method.PEARSON, r, len(s), math.exp(log_p), log_p, dropped)


def _permutations(n: int) -> np.ndarray:
    perms = np.zeros((1, 0), dtype=np.int8)
    for k in range(n):
        blocks = [np.insert(perms, j, k, axis=1) for j in range(k + 1)]
        perms = np.concatenate(blocks, axis=0)
    return perms


def _exact_spearman_p(rx: Sequence[float], ry: Sequence[float]) -> float:
    n = len(rx)
    cx = np.asarray(rx) - np.mean(rx)
    ry_arr = np.asarray(ry)
    observed = abs(float(cx @ ry_arr))
    stats = np.abs(ry_arr[_permutations(n)] @ cx)
    hits = int(np.count_nonzero(stats >= observed - 1e-9 * max(1.0, observed)))
    return hits / stats.shape[0]


def spearman(series: PairedSeries, exclude: Iterable[str] = (), exact: bool = False) -> CorrelationResult:
    """Pearson correlation of average-tie rank vectors.

    ``exact=True`` replaces the t approximation by a full permutation test
    (only for n <= 10).
    """
    s, dropped = _prepare(series, exclude)
    rx, ry = rank_vector(s.xs), rank_vector(s.ys)
    r = _pearson_r(rx, ry)
    if exact:
        if len(s) > EXACT_PERMUTATION_MAX_N:
            raise ValueError(f"exact permutation p-values are limited to n <= {EXACT_PERMUTATION_MAX_N}")
        p = _exact_spearman_p(rx, ry)
        return CorrelationResult(Method.SPEARMAN, r, len(s), p, math.log(p), dropped, "permutation")
    log_p = _log_p_from_r(r, len(s))
    return CorrelationResult(Method.SPEARMAN, r, len(s), math.exp(log_p), log_p, dropped)


def paired(pairs: Iterable[tuple[str, float, float]]) -> PairedSeries:
    pairs = list(pairs)
    if not pairs:
        return PairedSeries((), (), ())
    labels, xs, ys = zip(*pairs)
    return PairedSeries(labels, xs, ys)
