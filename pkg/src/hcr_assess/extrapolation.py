"""Percentile-tail extrapolation driven by the P_top10%/P efficiency ratio.

Under the tail model the number of papers in the top ``x`` percent is
``P * ep ** (2 - lg x)``, so any top-percentile count converts to any other
by a power of ``ep``. The same conversion maps a count of lenient-tier
researchers onto the count expected at a stricter tier.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from fractions import Fraction

from .errors import DegenerateSystemError, NestingError

DEFAULT_X = 5.0
DEFAULT_Y = 0.05


@dataclass(frozen=True)
class EpModel:
    ep: float
    source_P: float
    source_p_top10: float

    def check(self) -> None:
        if not 0.0 < self.ep < 1.0:
            raise DegenerateSystemError(f"ep={self.ep!r} outside (0, 1); the tail model does not apply")


def ep_from_metrics(P: float, p_top10: float) -> EpModel:
    """Build the model from raw (unrounded) totals.

    ``p_top10 == P`` or ``p_top10 == 0`` returns a model with a warning; such a
    model is rejected by every extrapolation call.
    """
    if not P > 0:
        raise DegenerateSystemError("degenerate system: P must be positive")
    if p_top10 < 0:
        raise NestingError("nesting violated: p_top10 is negative")
    if p_top10 > P:
        raise NestingError("nesting violated: p_top10 exceeds P")
    ep = p_top10 / P
    if ep >= 1.0 or ep <= 0.0:
        warnings.warn(f"ep={ep!r} is at the boundary; extrapolation will refuse this model", stacklevel=2)
    return EpModel(ep, P, p_top10)


def _check_level(x: float) -> None:
    if not (0.0 < x <= 100.0):
        raise ValueError(f"percentile level {x!r} outside (0, 100]")


def _decimal_ratio(a: float) -> Fraction:
    # levels are decimal quantities (0.05, not its binary neighbour)
    return Fraction(Decimal(repr(float(a))))


def level_gap(x: float, y: float) -> float:
    """``lg x - lg y``, exact when x/y is a power of ten (e.g. 5 and 0.05 give 2.0)."""
    ratio = _decimal_ratio(x) / _decimal_ratio(y)
    num, den = ratio.numerator, ratio.denominator
    for a, b, sign in ((num, den, 1), (den, num, -1)):
        if b == 1:
            k = 0
            while a % 10 == 0:
                a //= 10
                k += 1
            if a == 1:
                return float(sign * k)
    return math.log10(x) - math.log10(y)


def ptop_from_total(P: float, model: EpModel, level: float) -> float:
    """Papers in the top ``level`` percent from the total paper count."""
    model.check()
    _check_level(level)
    return P * model.ep ** level_gap(100.0, level)


def ptop_convert(p_top_x: float, model: EpModel, from_level: float, to_level: float) -> float:
    """Convert a top-``from_level``% count into a top-``to_level``% count."""
    model.check()
    _check_level(from_level)
    _check_level(to_level)
    return p_top_x * model.ep ** level_gap(from_level, to_level)


def predict_wos(ibb_hcr: float, model: EpModel, x: float = DEFAULT_X, y: float = DEFAULT_Y) -> float:
    """Strict-tier researcher count predicted from the lenient-tier count.

    The lenient list behaves like the top ``x``% and the strict list like the
    top ``y``%; with the defaults the factor is ``ep ** 2``.
    """
    if ibb_hcr < 0:
        raise ValueError("researcher count must be nonnegative")
    return ptop_convert(ibb_hcr, model, x, y)


def round_half_away(value: float) -> int:
    """Integer rounding with halves going away from zero (2.5 -> 3, -2.5 -> -3)."""
    return int(Decimal(repr(value)).quantize(Decimal(1), rounding=ROUND_HALF_UP))
