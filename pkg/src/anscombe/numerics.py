"""Special functions and deterministic root finding.

The normal CDF/quantile delegate to scipy's erfc-based rational
approximations (relative error well below 1e-12 for |x| <= 8); the Kummer
function uses a plain power series, which is all the nonnegative-argument
domain of this package requires.  Everything here is pure and reentrant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

from scipy.special import ndtr, ndtri

from .errors import BracketError, ConvergenceError, ValidationError

_SQRT_2PI = math.sqrt(2.0 * math.pi)

KUMMER_MAX_TERMS = 10_000
KUMMER_REL_TOL = 1e-16


def std_normal_pdf(x: float) -> float:
    """Standard normal density exp(-x^2/2)/sqrt(2*pi)."""
    return math.exp(-0.5 * x * x) / _SQRT_2PI


def std_normal_cdf(x: float) -> float:
    """Standard normal distribution function, erfc-based."""
    return float(ndtr(x))


def std_normal_quantile(p: float) -> float:
    """Inverse of std_normal_cdf on (0, 1)."""
    if not 0.0 < p < 1.0:
        raise ValidationError(f"quantile argument must lie in (0, 1), got {p}")
    return float(ndtri(p))


def kummer_m(a: float, b: float, z: float) -> float:
    """Confluent hypergeometric M(a, b, z) by power series.

    Restricted to a, b > 0 and z >= 0, where the series has positive terms
    and terminates cleanly once a term drops below 1e-16 of the partial sum.
    """
    if a <= 0.0 or b <= 0.0:
        raise ValidationError(f"kummer_m requires a, b > 0, got a={a}, b={b}")
    if z < 0.0:
        raise ValidationError(f"kummer_m requires z >= 0, got z={z}")
    total = 1.0
    term = 1.0
    for k in range(KUMMER_MAX_TERMS):
        term *= (a + k) * z / ((b + k) * (k + 1))
        total += term
        if term < KUMMER_REL_TOL * total:
            return total
    raise ConvergenceError(
        f"Kummer series did not converge within {KUMMER_MAX_TERMS} terms "
        f"for (a={a}, b={b}, z={z})",
        last_iterate=total,
    )


@dataclass(frozen=True)
class RootBracket:
    """Bracketing interval for find_root; tol is absolute on the width."""

    lo: float
    hi: float
    tol: float = 1e-12
    max_iter: int = 300

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValidationError(f"bracket needs lo < hi, got [{self.lo}, {self.hi}]")
        if self.tol <= 0.0:
            raise ValidationError(f"bracket tol must be positive, got {self.tol}")
        if self.max_iter < 1:
            raise ValidationError(f"max_iter must be >= 1, got {self.max_iter}")


def find_root(f: Callable[[float], float], bracket: RootBracket) -> float:
    """Deterministic bracketed root search.

    Illinois-style secant steps with a plain bisection step forced every
    fourth iteration, so convergence is guaranteed whenever f changes sign
    over the bracket.  Raises BracketError without a sign change and
    ConvergenceError if the width has not reached tol within max_iter.
    """
    lo, hi = bracket.lo, bracket.hi
    flo, fhi = f(lo), f(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if (flo < 0.0) == (fhi < 0.0):
        raise BracketError(
            f"no sign change over [{lo}, {hi}]: f(lo)={flo}, f(hi)={fhi}"
        )
    side = 0
    for it in range(bracket.max_iter):
        if hi - lo <= bracket.tol:
            return 0.5 * (lo + hi)
        if it % 4 == 3:
            x = 0.5 * (lo + hi)
        else:
            x = (lo * fhi - hi * flo) / (fhi - flo)
            margin = 1e-3 * (hi - lo)
            if not lo + margin <= x <= hi - margin:
                x = 0.5 * (lo + hi)
        fx = f(x)
        if fx == 0.0:
            return x
        if (fx < 0.0) == (flo < 0.0):
            lo, flo = x, fx
            if side == -1:
                fhi *= 0.5
            side = -1
        else:
            hi, fhi = x, fx
            if side == 1:
                flo *= 0.5
            side = 1
    raise ConvergenceError(
        f"root search exceeded {bracket.max_iter} iterations on "
        f"[{bracket.lo}, {bracket.hi}] (width {hi - lo:.3e})",
        last_iterate=0.5 * (lo + hi),
    )
