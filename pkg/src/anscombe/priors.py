"""Prior families on the standardized effect, the h-function, and the
coordinate map between clinical and standardized units.

The h-function h(r, y) = integral of d * exp(d*y - d^2*r/2) over the prior
is the prior-weighted exponential-martingale mixture: its sign is the
optimal terminal treatment decision and its magnitude is the stopping
reward after the change of measure to driftless coordinates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .errors import SingularInputError, ValidationError

WEIGHT_SUM_TOL = 1e-12


@dataclass(frozen=True)
class NormalConjugate:
    """Gaussian prior N(m0, 1/r0) on the standardized effect.

    r0 is the prior-observation fraction; r0 = 0 is the improper
    uninformative limit, usable only where documented.
    """

    m0: float
    r0: float

    def __post_init__(self):
        if self.r0 < 0.0:
            raise ValidationError(f"normal prior needs r0 >= 0, got {self.r0}")


@dataclass(frozen=True)
class SymmetricTwoPoint:
    """Equal mass 1/2 on +delta0 and -delta0 (the maximin prior)."""

    delta0: float

    def __post_init__(self):
        if self.delta0 <= 0.0:
            raise ValidationError(f"two-point prior needs delta0 > 0, got {self.delta0}")


@dataclass(frozen=True)
class DiscreteMixture:
    """Finitely many atoms with positive weights summing to one."""

    points: tuple[float, ...]
    weights: tuple[float, ...]

    def __init__(self, points, weights):
        object.__setattr__(self, "points", tuple(float(p) for p in points))
        object.__setattr__(self, "weights", tuple(float(w) for w in weights))
        if len(self.points) != len(self.weights) or not self.points:
            raise ValidationError("mixture needs matching, nonempty points and weights")
        if any(w <= 0.0 for w in self.weights):
            raise ValidationError("mixture weights must be positive")
        if abs(sum(self.weights) - 1.0) > WEIGHT_SUM_TOL:
            raise ValidationError(
                f"mixture weights must sum to 1 within {WEIGHT_SUM_TOL}, "
                f"got {sum(self.weights)}"
            )


Prior = Union[NormalConjugate, SymmetricTwoPoint, DiscreteMixture]


def atoms(prior: Prior) -> tuple[np.ndarray, np.ndarray]:
    """Atom locations and weights for the discrete families.

    NormalConjugate has no atom representation; its boundary problems are
    handled by the conjugate-normal module.
    """
    if isinstance(prior, SymmetricTwoPoint):
        d = prior.delta0
        return np.array([d, -d]), np.array([0.5, 0.5])
    if isinstance(prior, DiscreteMixture):
        return np.array(prior.points), np.array(prior.weights)
    raise ValidationError(
        "normal-conjugate priors have no atoms; use the conjugate-normal solver"
    )


def is_symmetric(prior: Prior) -> bool:
    """True when the prior is invariant under sign flip of the effect."""
    if isinstance(prior, SymmetricTwoPoint):
        return True
    if isinstance(prior, NormalConjugate):
        return prior.m0 == 0.0
    pts, wts = atoms(prior)
    paired = {}
    for p, w in zip(pts, wts):
        paired[p] = paired.get(p, 0.0) + w
    for p, w in paired.items():
        if abs(paired.get(-p, 0.0) - w) > WEIGHT_SUM_TOL:
            return False
    return True


def h_function(prior: Prior, r: float, y: float) -> float:
    """The h-function at standardized time r and state y.

    Discrete families: the exact atom sum; for sign-symmetric atom sets the
    terms are paired antisymmetrically so that h(r, -y) == -h(r, y) holds to
    the last bit.  NormalConjugate: the posterior mean
    m_r(y) = (m0*r0 + y)/(r0 + r) times exp(m_r^2 (r0+r)/2)/sqrt(r0+r),
    which equals the true mixture integral up to a fixed positive factor;
    callers must treat the normal-family value as defined up to scale.
    """
    if r < 0.0:
        raise ValidationError(f"h-function needs r >= 0, got r={r}")
    if isinstance(prior, NormalConjugate):
        tot = prior.r0 + r
        if tot <= 0.0:
            raise SingularInputError(
                "h-function is singular for the uninformative normal prior at r = 0"
            )
        m = (prior.m0 * prior.r0 + y) / tot
        return m * math.exp(0.5 * m * m * tot) / math.sqrt(tot)
    pts, wts = atoms(prior)
    items = sorted(zip(pts.tolist(), wts.tolist()))
    mirrored = sorted(zip((-pts).tolist(), wts.tolist()))
    if items == mirrored:
        total = 0.0
        for p, w in items:
            if p > 0.0:
                total += (
                    w * p * math.exp(-0.5 * p * p * r)
                    * (math.exp(p * y) - math.exp(-p * y))
                )
        return total
    return float(np.sum(wts * pts * np.exp(pts * y - 0.5 * pts * pts * r)))


def h_function_exact_scale(prior: Prior, r: float, y: float) -> float:
    """The h-function with the true mixture normalisation for every family.

    For NormalConjugate this multiplies the up-to-scale form by
    sqrt(r0) * exp(-r0*m0^2/2), recovering the exact Gaussian integral
    (requires r0 > 0).  Used where absolute values matter, e.g. when
    cross-checking simulated utilities between drifted and driftless runs.
    """
    if isinstance(prior, NormalConjugate):
        if prior.r0 <= 0.0:
            raise SingularInputError(
                "exact-scale h-function needs a proper normal prior (r0 > 0)"
            )
        scale = math.sqrt(prior.r0) * math.exp(-0.5 * prior.r0 * prior.m0 * prior.m0)
        return scale * h_function(prior, r, y)
    return h_function(prior, r, y)


def optimal_decision(prior: Prior, r: float, y: float) -> int:
    """Optimal terminal decision: +1 iff the h-function is >= 0 at (r, y).

    The tie at exactly zero goes to +1 so simulations are reproducible.
    """
    return 1 if h_function(prior, r, y) >= 0.0 else -1


@dataclass(frozen=True)
class StandardizedScaling:
    """Map between clinical units (mu, t patients, x response-sum) and
    standardized units (delta, r, y).

    horizon_mean is E[N] in patients; for a fixed horizon it equals N.
    """

    sigma: float
    horizon_mean: float

    def __post_init__(self):
        if self.sigma <= 0.0:
            raise ValidationError(f"sigma must be positive, got {self.sigma}")
        if self.horizon_mean <= 0.0:
            raise ValidationError(
                f"horizon_mean must be positive, got {self.horizon_mean}"
            )


def to_standardized(
    scaling: StandardizedScaling, mu: float, t: float, x: float
) -> tuple[float, float, float]:
    """(mu, t, x) -> (delta, r, y) with delta = mu*sqrt(E N)/sigma,
    r = t/E[N], y = x/sqrt(E[N]*sigma^2)."""
    root_n = math.sqrt(scaling.horizon_mean)
    delta = mu * root_n / scaling.sigma
    r = t / scaling.horizon_mean
    y = x / (root_n * scaling.sigma)
    return delta, r, y


def from_standardized(
    scaling: StandardizedScaling, delta: float, r: float, y: float
) -> tuple[float, float, float]:
    """Inverse of to_standardized; the round trip is exact arithmetic."""
    root_n = math.sqrt(scaling.horizon_mean)
    mu = delta * scaling.sigma / root_n
    t = r * scaling.horizon_mean
    x = y * root_n * scaling.sigma
    return mu, t, x


def prior_to_json(prior: Prior) -> dict:
    """JSON object form: {"family": ..., ...}."""
    if isinstance(prior, NormalConjugate):
        return {"family": "normal", "m0": prior.m0, "r0": prior.r0}
    if isinstance(prior, SymmetricTwoPoint):
        return {"family": "two_point", "delta0": prior.delta0}
    if isinstance(prior, DiscreteMixture):
        return {
            "family": "mixture",
            "points": list(prior.points),
            "weights": list(prior.weights),
        }
    raise ValidationError(f"unknown prior type {type(prior)!r}")


def prior_from_json(obj: dict) -> Prior:
    """Parse the JSON object form, validating the family tag and fields."""
    if not isinstance(obj, dict):
        raise ValidationError("prior JSON must be an object")
    family = obj.get("family")
    try:
        if family == "normal":
            return NormalConjugate(m0=float(obj["m0"]), r0=float(obj["r0"]))
        if family == "two_point":
            return SymmetricTwoPoint(delta0=float(obj["delta0"]))
        if family == "mixture":
            return DiscreteMixture(points=obj["points"], weights=obj["weights"])
    except KeyError as exc:
        raise ValidationError(f"prior JSON missing field {exc}") from exc
    raise ValidationError(f"unknown prior family {family!r}")
