"""Closed-form and semi-closed-form optimal thresholds for the
random-horizon problems.

With an exponential patient horizon the discounted stopping problems have
constant optimal thresholds: a two-sided one (worst-case symmetric effect)
and a one-sided one (standard treatment given outside the trial).  With a
Lomax horizon matched to the prior weight, the standardized problem reduces
to a discounted Ornstein-Uhlenbeck problem whose threshold solves a ratio
equation in Kummer functions; the moving boundary is then threshold*sqrt(-s).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

from .errors import BracketError, ValidationError
from .numerics import RootBracket, find_root, kummer_m

RESIDUAL_CAP = 1e-10
_EXPANSION_DOUBLINGS = 30


@dataclass(frozen=True)
class ThresholdResult:
    """A solved constant threshold with its defining-equation residual."""

    threshold: float
    residual: float
    expected_stop_time: Optional[float] = None

    def __post_init__(self):
        if not (math.isfinite(self.threshold) and self.threshold > 0.0):
            raise ValidationError(f"threshold must be finite positive, got {self.threshold}")
        if abs(self.residual) > RESIDUAL_CAP:
            raise ValidationError(
                f"threshold residual {self.residual} exceeds {RESIDUAL_CAP}"
            )


def _expand_bracket(f, hi0: float) -> RootBracket:
    """Double the right endpoint from hi0 until f changes sign.

    f must be positive at 0+; the bracket is capped after 2^30 growth.
    """
    lo = 1e-6
    flo = f(lo)
    hi = hi0
    for _ in range(_EXPANSION_DOUBLINGS + 1):
        fhi = f(hi)
        if (fhi < 0.0) != (flo < 0.0) or fhi == 0.0:
            return RootBracket(lo, hi, tol=1e-14, max_iter=400)
        hi *= 2.0
    raise BracketError(
        f"no sign change up to {hi0} * 2^{_EXPANSION_DOUBLINGS} during bracket expansion"
    )


def maximin_exp_two_sided(delta0: float) -> ThresholdResult:
    """Two-sided threshold for the exponential-horizon worst-case problem.

    The threshold is the unique positive root of
        delta0*cosh(delta0*x)*cosh(C*x) - C*sinh(delta0*x)*sinh(C*x) = 0,
    C = sqrt(delta0^2 + 2).  The mean stopping time of the threshold rule
    from the origin is threshold^2.
    """
    if delta0 <= 0.0:
        raise ValidationError(f"delta0 must be positive, got {delta0}")
    c = math.sqrt(delta0 * delta0 + 2.0)

    def scaled(x: float) -> float:
        # cosh/sinh share the overflow-prone factor exp((delta0+C)x)/4;
        # dividing it out keeps the sign and an O(1) magnitude.
        a = math.exp(-2.0 * delta0 * x)
        b = math.exp(-2.0 * c * x)
        return delta0 * (1.0 + a) * (1.0 + b) - c * (1.0 - a) * (1.0 - b)

    root = find_root(scaled, _expand_bracket(scaled, 1.0 / delta0))
    residual = delta0 * math.cosh(delta0 * root) * math.cosh(c * root) - c * math.sinh(
        delta0 * root
    ) * math.sinh(c * root)
    return ThresholdResult(
        threshold=root, residual=residual, expected_stop_time=root * root
    )


def maximin_exp_one_sided(delta0: float) -> ThresholdResult:
    """One-sided threshold for the exponential-horizon problem in which only
    stopping above makes sense (the q -> infinity limit).

    Closed form ln(sqrt(delta0^2/2 + 1) + delta0/sqrt(2)) / delta0; the
    algebraically equivalent artanh form is evaluated as a transcription
    guard and both must agree to 1e-12.  No finite mean stopping time: a
    one-sided level is hit almost surely but with infinite expectation.
    """
    if delta0 <= 0.0:
        raise ValidationError(f"delta0 must be positive, got {delta0}")
    c = math.sqrt(delta0 * delta0 + 2.0)
    form_log_ratio = math.log((c + delta0) / (c - delta0)) / (2.0 * delta0)
    form_arcosh = math.log(math.sqrt(0.5 * delta0 * delta0 + 1.0) + delta0 / math.sqrt(2.0)) / delta0
    if abs(form_log_ratio - form_arcosh) > 1e-12:
        raise ValidationError(
            f"closed-form cross-check failed: {form_log_ratio} vs {form_arcosh}"
        )
    x = form_arcosh
    residual = (delta0 * math.cosh(delta0 * x) - c * math.sinh(delta0 * x)) * math.exp(c * x)
    return ThresholdResult(threshold=x, residual=residual, expected_stop_time=None)


def _lomax_ratio_equation(r0: float, w: float) -> float:
    """2(r0+1) * M(r0+2, 3/2, w^2/2)/M(r0+1, 1/2, w^2/2) * w^2 - (1 + w^2)."""
    z = 0.5 * w * w
    num = kummer_m(r0 + 2.0, 1.5, z)
    den = kummer_m(r0 + 1.0, 0.5, z)
    return 2.0 * (r0 + 1.0) * (num / den) * w * w - (1.0 + w * w)


@lru_cache(maxsize=256)
def _lomax_threshold_value(r0: float) -> float:
    def f(w: float) -> float:
        return _lomax_ratio_equation(r0, w)

    return find_root(f, _expand_bracket(f, 1.0))


def lomax_threshold(r0: float) -> ThresholdResult:
    """Threshold of the discounted Ornstein-Uhlenbeck problem arising from a
    Lomax horizon with scale matched to the prior weight (omega = r0 + 1)."""
    if r0 <= 0.0:
        raise ValidationError(f"r0 must be positive, got {r0}")
    w = _lomax_threshold_value(r0)
    return ThresholdResult(
        threshold=w, residual=_lomax_ratio_equation(r0, w), expected_stop_time=None
    )


def lomax_boundary(r0: float, s: float) -> float:
    """Moving boundary threshold*sqrt(-s) in standardized time s < 0."""
    if s >= 0.0:
        raise ValidationError(f"lomax_boundary needs s < 0, got {s}")
    return lomax_threshold(r0).threshold * math.sqrt(-s)
