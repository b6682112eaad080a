"""Patient-horizon models and their standardized discount functions.

Each model induces a discount f(r) on standardized time r = t/E[N]: the
expected post-stop patient mass per expected-horizon unit.  A fixed horizon
gives the familiar (1-r)+, an exponential horizon gives exp(-r), and a
Lomax (shifted-Pareto) horizon gives (1 + r/(omega-1))^(1-omega).  All
discounts start at 1, have slope -1 at 0, and are nonincreasing and convex.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import ValidationError


@dataclass(frozen=True)
class FixedHorizon:
    """Known patient horizon of n patients."""

    n: float

    def __post_init__(self):
        if self.n <= 0.0:
            raise ValidationError(f"fixed horizon needs n > 0, got {self.n}")


@dataclass(frozen=True)
class ExponentialHorizon:
    """Exponential horizon with rate lam (mean 1/lam patients)."""

    lam: float

    def __post_init__(self):
        if self.lam <= 0.0:
            raise ValidationError(f"exponential horizon needs lam > 0, got {self.lam}")


@dataclass(frozen=True)
class LomaxHorizon:
    """Lomax horizon: survival (lam/(lam+u))^omega, mean lam/(omega-1).

    omega > 1 keeps the mean finite.
    """

    lam: float
    omega: float

    def __post_init__(self):
        if self.lam <= 0.0:
            raise ValidationError(f"Lomax horizon needs lam > 0, got {self.lam}")
        if self.omega <= 1.0:
            raise ValidationError(f"Lomax horizon needs omega > 1, got {self.omega}")


@dataclass(frozen=True)
class TabulatedHorizon:
    """User-supplied discount as a table on standardized time.

    Linear interpolation between nodes; beyond the last node the discount
    is extrapolated as zero.  Ingestion validates f(0) = 1, monotone
    nonincreasing values, and convexity of the piecewise-linear chords.
    """

    r: tuple[float, ...]
    f: tuple[float, ...]

    def __init__(self, r, f):
        object.__setattr__(self, "r", tuple(float(v) for v in r))
        object.__setattr__(self, "f", tuple(float(v) for v in f))
        if len(self.r) != len(self.f) or len(self.r) < 2:
            raise ValidationError("tabulated horizon needs >= 2 matching (r, f) nodes")
        if self.r[0] != 0.0 or abs(self.f[0] - 1.0) > 1e-12:
            raise ValidationError("tabulated horizon must start at (r=0, f=1)")
        if any(b <= a for a, b in zip(self.r, self.r[1:])):
            raise ValidationError("tabulated horizon times must be strictly increasing")
        slopes = [
            (fb - fa) / (rb - ra)
            for (ra, rb, fa, fb) in zip(self.r, self.r[1:], self.f, self.f[1:])
        ]
        if any(s > 1e-12 for s in slopes):
            raise ValidationError("tabulated discount must be nonincreasing")
        if any(s2 < s1 - 1e-12 for s1, s2 in zip(slopes, slopes[1:])):
            raise ValidationError("tabulated discount must be convex")
        if any(v < -1e-12 for v in self.f):
            raise ValidationError("tabulated discount must be nonnegative")


HorizonModel = Union[FixedHorizon, ExponentialHorizon, LomaxHorizon, TabulatedHorizon]


def horizon_mean(model: HorizonModel) -> float:
    """E[N] in patient units (closed form)."""
    if isinstance(model, FixedHorizon):
        return model.n
    if isinstance(model, ExponentialHorizon):
        return 1.0 / model.lam
    if isinstance(model, LomaxHorizon):
        return model.lam / (model.omega - 1.0)
    raise ValidationError("a tabulated horizon is already standardized; no patient-unit mean")


def f_tilde(model: HorizonModel, r: float) -> float:
    """Standardized discount at r >= 0."""
    if r < 0.0:
        raise ValidationError(f"discount needs r >= 0, got {r}")
    if isinstance(model, FixedHorizon):
        return max(1.0 - r, 0.0)
    if isinstance(model, ExponentialHorizon):
        return math.exp(-r)
    if isinstance(model, LomaxHorizon):
        w = model.omega
        return (1.0 + r / (w - 1.0)) ** (1.0 - w)
    if r >= model.r[-1]:
        return max(model.f[-1], 0.0) if r == model.r[-1] else 0.0
    return float(np.interp(r, model.r, model.f))


def f_tilde_derivative(model: HorizonModel, r: float) -> float:
    """d/dr of the discount: minus the standardized survival function.

    Equals -P(N > r*E[N]); in particular -1 at r = 0 for every model.
    At the fixed-horizon kink r = 1 the right derivative 0 is returned.
    """
    if r < 0.0:
        raise ValidationError(f"discount derivative needs r >= 0, got {r}")
    if isinstance(model, FixedHorizon):
        return -1.0 if r < 1.0 else 0.0
    if isinstance(model, ExponentialHorizon):
        return -math.exp(-r)
    if isinstance(model, LomaxHorizon):
        w = model.omega
        return -((1.0 + r / (w - 1.0)) ** (-w))
    for ra, rb, fa, fb in zip(model.r, model.r[1:], model.f, model.f[1:]):
        if r < rb:
            return (fb - fa) / (rb - ra)
    return 0.0


def horizon_to_json(model: HorizonModel) -> dict:
    if isinstance(model, FixedHorizon):
        return {"horizon": "fixed", "n": model.n}
    if isinstance(model, ExponentialHorizon):
        return {"horizon": "exponential", "lambda": model.lam}
    if isinstance(model, LomaxHorizon):
        return {"horizon": "lomax", "lambda": model.lam, "omega": model.omega}
    if isinstance(model, TabulatedHorizon):
        return {"horizon": "table", "r": list(model.r), "f": list(model.f)}
    raise ValidationError(f"unknown horizon type {type(model)!r}")


def horizon_from_json(obj: dict) -> HorizonModel:
    if not isinstance(obj, dict):
        raise ValidationError("horizon JSON must be an object")
    kind = obj.get("horizon")
    try:
        if kind == "fixed":
            return FixedHorizon(n=float(obj["n"]))
        if kind == "exponential":
            return ExponentialHorizon(lam=float(obj["lambda"]))
        if kind == "lomax":
            return LomaxHorizon(lam=float(obj["lambda"]), omega=float(obj["omega"]))
        if kind == "table":
            return TabulatedHorizon(r=obj["r"], f=obj["f"])
    except KeyError as exc:
        raise ValidationError(f"horizon JSON missing field {exc}") from exc
    raise ValidationError(f"unknown horizon kind {kind!r}")
