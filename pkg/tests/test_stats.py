from __future__ import annotations

import itertools
import math
import random

import mpmath as mp
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from hcr_assess.errors import ConstantSeriesError, InsufficientDataError
from hcr_assess.stats import (
    Method,
    PairedSeries,
    log_t_sf_two_sided,
    paired,
    pearson,
    rank_vector,
    spearman,
    t_sf_two_sided,
)

# frozen oracles (mpmath, 50 digits)
PEARSON_5PT = 0.83874213682932566483  # 11 / sqrt(172)
SPEARMAN_6PT = -0.46381682852195872780  # -8 / sqrt(297.5)
T_SF_7_42_DF31 = 2.3419447630260688541e-8  # quadrature of the t density


def series(xs, ys):
    return PairedSeries(tuple(f"c{i}" for i in range(len(xs))), xs, ys)


def t_tail_quadrature(t: float, df: int) -> mp.mpf:
    """Two-sided tail by integrating the t density, with s = t * e^v."""
    t, n = mp.mpf(t), mp.mpf(df)
    c = mp.gamma((n + 1) / 2) / (mp.sqrt(n * mp.pi) * mp.gamma(n / 2))

    def f(v):
        s = t * mp.exp(v)
        return c * (1 + s * s / n) ** (-(n + 1) / 2) * s

    # the integrand decays like exp(-df * v); break on that scale
    points = [0] + [mp.mpf(2) ** k / n for k in range(-2, 12)] + [mp.inf]
    return 2 * mp.quad(f, points)


# -- rank_vector --------------------------------------------------------------------

@pytest.mark.parametrize(
    "values, ranks",
    [
        ([10, 30, 20], [3, 1, 2]),
        ([5, 5, 1], [1.5, 1.5, 3]),
        ([7], [1]),
        ([1, 1, 1, 1], [2.5, 2.5, 2.5, 2.5]),
        ([3, 1, 4, 1, 5, 9], [4, 5.5, 3, 5.5, 2, 1]),
    ],
)
def test_rank_vector_examples(values, ranks):
    assert rank_vector(values) == ranks


@given(st.lists(st.integers(-5, 5), min_size=1, max_size=30))
def test_rank_sum_is_preserved_under_ties(values):
    n = len(values)
    assert sum(rank_vector(values)) == n * (n + 1) / 2


# -- pearson ---------------------------------------------------------------------------

def test_pearson_five_point_oracle():
    res = pearson(series([1, 2, 3, 4, 5], [2, 1, 5, 4, 6]))
    assert res.method is Method.PEARSON
    assert res.r == pytest.approx(PEARSON_5PT, rel=1e-15)


def test_pearson_affine_is_one():
    xs = [0.5, 1.5, 2.0, 7.25, 11.0, 13.5]
    assert abs(pearson(series(xs, [2 * x + 7 for x in xs])).r - 1.0) <= 1e-12


def test_perfect_correlation_gives_zero_p():
    res = pearson(series([1, 2, 3, 4], [1, 2, 3, 4]))
    assert res.r == 1.0
    assert res.p_two_sided == 0.0 and res.log_p == -math.inf


def test_constant_series_rejected():
    with pytest.raises(ConstantSeriesError, match="constant series"):
        pearson(series([1, 2, 3], [4, 4, 4]))


def test_too_few_after_exclusion():
    s = PairedSeries(("USA", "GBR", "DEU"), (1, 2, 3), (3, 1, 2))
    with pytest.raises(InsufficientDataError):
        pearson(s, exclude=("USA",))


def test_exclusion_is_reported_and_counted():
    s = PairedSeries(("USA", "GBR", "DEU", "FRA"), (10, 2, 3, 4), (1, 2, 3, 5))
    res = pearson(s, exclude=("USA", "NOPE"))
    assert res.excluded == ("USA",)
    assert res.n == len(s) - len(res.excluded) == 3


finite = st.floats(-1e3, 1e3, allow_nan=False).map(lambda v: round(v, 3))
pairs = st.lists(st.tuples(finite, finite), min_size=3, max_size=25)


def _nonconstant(ps):
    return len({p[0] for p in ps}) > 1 and len({p[1] for p in ps}) > 1


@given(pairs, st.floats(0.01, 100), st.floats(-100, 100), st.floats(0.01, 100), st.floats(-100, 100))
@settings(max_examples=200)
def test_pearson_affine_invariance(ps, a, b, c, d):
    assume(_nonconstant(ps))
    xs, ys = zip(*ps)
    base = pearson(series(xs, ys)).r
    moved = pearson(series([a * x + b for x in xs], [c * y + d for y in ys])).r
    assert abs(moved - base) <= 1e-12 * max(1.0, abs(base)) + 1e-12
    flipped = pearson(series([-a * x for x in xs], ys)).r
    assert abs(flipped + base) <= 1e-12


@given(pairs)
def test_coefficients_bounded_and_symmetric(ps):
    assume(_nonconstant(ps))
    xs, ys = zip(*ps)
    for fn in (pearson, spearman):
        r1 = fn(series(xs, ys))
        r2 = fn(series(ys, xs))
        assert -1.0 <= r1.r <= 1.0
        assert r1.r == r2.r
        assert 0.0 <= r1.p_two_sided <= 1.0


# -- spearman ----------------------------------------------------------------------------

def test_spearman_tied_six_point_oracle():
    # hand ranks: rx = [4, 5.5, 3, 5.5, 2, 1], ry = [5, 2, 6, 1, 4, 3]
    res = spearman(series([3, 1, 4, 1, 5, 9], [2, 7, 1, 8, 2.5, 6]))
    assert res.r == pytest.approx(SPEARMAN_6PT, rel=1e-14)


def test_spearman_monotone_is_one():
    xs = [1, 5, 2, 8, 3]
    assert spearman(series(xs, [math.exp(x) for x in xs])).r == 1.0


def test_spearman_equals_pearson_on_average_ranks():
    rnd = random.Random(20240601)
    for _ in range(1000):
        n = rnd.randint(3, 12)
        xs = [rnd.randint(0, 5) for _ in range(n)]
        ys = [rnd.randint(0, 5) for _ in range(n)]
        if len(set(xs)) < 2 or len(set(ys)) < 2:
            continue
        s = series(xs, ys)
        ranked = series(rank_vector(xs), rank_vector(ys))
        assert spearman(s).r == pearson(ranked).r


def _brute_force_rho(xs, ys):
    # rank by counting, independent of rank_vector
    def ranks(v):
        return [sum(1 for w in v if w > u) + (sum(1 for w in v if w == u) + 1) / 2 for u in v]

    rx, ry = ranks(xs), ranks(ys)
    n = len(xs)
    mx, my = sum(rx) / n, sum(ry) / n
    num = sum((a - mx) * (b - my) for a, b in zip(rx, ry))
    den = math.sqrt(sum((a - mx) ** 2 for a in rx) * sum((b - my) ** 2 for b in ry))
    return num / den


@given(pairs)
def test_spearman_matches_brute_force(ps):
    assume(_nonconstant(ps))
    xs, ys = zip(*ps)
    assert spearman(series(xs, ys)).r == pytest.approx(_brute_force_rho(xs, ys), abs=1e-12)


@given(pairs)
def test_spearman_invariant_under_increasing_transform(ps):
    assume(_nonconstant(ps))
    xs, ys = zip(*ps)
    base = spearman(series(xs, ys)).r
    assert spearman(series([x ** 3 + 5 for x in xs], [math.atan(y) * 2 for y in ys])).r == base


# -- p-values ------------------------------------------------------------------------------

def test_t_sf_closed_forms():
    assert t_sf_two_sided(0.0, 7) == 1.0
    assert t_sf_two_sided(1.0, 1) == pytest.approx(0.5, rel=1e-14)
    # df = 2: p = 1 - t / sqrt(t^2 + 2)
    assert t_sf_two_sided(3.0, 2) == pytest.approx(1 - 3 / math.sqrt(11), rel=1e-13)


def test_t_sf_frozen_oracle():
    assert t_sf_two_sided(7.42, 31) == pytest.approx(T_SF_7_42_DF31, rel=1e-10)


@pytest.mark.parametrize("df", [1, 5, 30, 53])
def test_t_sf_against_quadrature(df):
    for t in (0.01, 0.3, 1.0, 2.5, 7.42, 15.0, 40.0, 100.0):
        with mp.workdps(30):
            oracle = float(t_tail_quadrature(t, df))
        assert abs(t_sf_two_sided(t, df) - oracle) / oracle < 1e-8, (t, df)
        assert t_sf_two_sided(-t, df) == t_sf_two_sided(t, df)


def test_log_p_stays_finite_far_below_double_range():
    # df = 1 is Cauchy: p = (2/pi) * atan(1/t)
    for t in (1e150, 1e300):
        expected = math.log(2 / math.pi) - math.log(t)
        assert log_t_sf_two_sided(t, 1) == pytest.approx(expected, rel=1e-12)
    # p near 1e-310 at df = 53, checked against the closed-form beta in log space
    t, n = 5e6, 53
    with mp.workdps(40):
        exact = mp.log(mp.betainc(mp.mpf(n) / 2, 0.5, 0, n / (n + mp.mpf(t) ** 2), regularized=True))
    got = log_t_sf_two_sided(t, n)
    assert math.isfinite(got)
    assert got / math.log(10) < -300
    assert got == pytest.approx(float(exact), rel=1e-10)


@given(st.integers(3, 60), st.floats(0.0, 0.999), st.floats(0.0, 0.999))
def test_p_decreases_with_abs_r(n, a, b):
    lo, hi = sorted((a, b))
    assume(hi - lo > 1e-6)
    df = n - 2

    def p(r):
        return log_t_sf_two_sided(r * math.sqrt(df / (1 - r * r)), df)

    assert p(hi) < p(lo) or (p(hi) == p(lo) == 0.0)


# -- exact permutation mode ------------------------------------------------------------------

def _brute_force_perm_p(xs, ys):
    obs = abs(_brute_force_rho(xs, ys))
    hits = total = 0
    for perm in itertools.permutations(ys):
        total += 1
        if len(set(perm)) > 1 and abs(_brute_force_rho(xs, perm)) >= obs - 1e-12:
            hits += 1
    return hits / total


@pytest.mark.parametrize(
    "xs, ys",
    [
        ([1, 2, 3, 4], [1, 2, 3, 4]),
        ([1, 2, 3, 4, 5], [2, 1, 4, 3, 5]),
        ([3, 1, 4, 1, 5, 9], [2, 7, 1, 8, 2.5, 6]),
        ([1, 2, 2, 3, 5, 8, 13], [1, 1, 2, 6, 24, 120, 720]),
    ],
)
def test_exact_permutation_p(xs, ys):
    res = spearman(series(xs, ys), exact=True)
    assert res.p_method == "permutation"
    assert res.p_two_sided == pytest.approx(_brute_force_perm_p(xs, ys), abs=1e-12)


def test_exact_permutation_limited_to_small_n():
    xs = list(range(11))
    with pytest.raises(ValueError):
        spearman(series(xs, xs[::-1]), exact=True)


def test_paired_builder():
    s = paired([("A", 1, 2), ("B", 3, 4)])
    assert s.labels == ("A", "B") and s.xs == (1.0, 3.0)
    assert len(paired([])) == 0
    with pytest.raises(ValueError):
        paired([("A", 1, 2), ("A", 3, 4)])
