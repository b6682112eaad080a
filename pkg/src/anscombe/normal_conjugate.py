"""The standardized single-boundary problem for conjugate-normal priors and
the transforms that turn its solution into concrete decision boundaries.

After conditioning on the data, a normal prior reduces the trial problem to
stopping a standard Brownian motion W on the negative clock
s = -(r0+1)/(r0+r), with reward (1 + 1/s)|y| (plus the asymmetric penalty
2q y+ when standard-treatment patients sit outside the trial).  One solved
curve c(s) serves every (m0, r0): the posterior-mean, response-sum, and
p-value boundaries are fixed algebraic images of it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _kernels
from .errors import RangeError, SolverError, ValidationError
from .numerics import std_normal_cdf, std_normal_quantile
from .volterra import SolverConfig

RESIDUAL_CERTIFICATE = 1e-3

DEFAULT_S_MIN = -1e4
GRID_EPS = 1e-6


@dataclass(eq=False)
class StandardBoundary:
    """Stopping boundary of the standardized problem on a decreasing grid
    from s = -1 (where it collapses to 0).

    lower None with stop_below True means the symmetric case lower = -upper;
    stop_below False marks the one-sided limit without lower stopping.
    """

    grid: np.ndarray
    upper: np.ndarray
    lower: Optional[np.ndarray] = None
    stop_below: bool = True

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        self.upper = np.asarray(self.upper, dtype=float)
        g, u = self.grid, self.upper
        if g.ndim != 1 or g.shape != u.shape or len(g) < 2:
            raise ValidationError("standard boundary needs matching 1-d arrays")
        if g[0] != -1.0:
            raise ValidationError(f"standard boundary grid must start at s = -1, got {g[0]}")
        if np.any(np.diff(g) >= 0.0):
            raise ValidationError("standard boundary grid must decrease strictly")
        if not np.all(np.isfinite(u)) or np.any(u < 0.0) or u[0] != 0.0:
            raise ValidationError("upper curve must be finite, >= 0, and 0 at s = -1")
        if self.lower is not None:
            if not self.stop_below:
                raise ValidationError("stop_below=False requires lower=None")
            self.lower = np.asarray(self.lower, dtype=float)
            lo = self.lower
            if lo.shape != g.shape or not np.all(np.isfinite(lo)):
                raise ValidationError("lower curve must be finite and match the grid")
            if np.any(lo > 0.0) or lo[0] != 0.0:
                raise ValidationError("lower curve must be <= 0 and 0 at s = -1")

    @property
    def s_min(self) -> float:
        return float(self.grid[-1])

    def _interp(self, values: np.ndarray, s):
        s_arr = np.asarray(s, dtype=float)
        if np.any(s_arr > -1.0):
            raise ValidationError("standardized time must satisfy s <= -1")
        if np.any(s_arr < self.grid[-1]):
            raise RangeError(
                f"requested s below the solved range [{self.grid[-1]:.6g}, -1]; "
                "re-solve with a deeper s_min"
            )
        return np.interp(s_arr, self.grid[::-1], values[::-1])

    def upper_at(self, s):
        return self._interp(self.upper, s)

    def lower_at(self, s):
        if not self.stop_below:
            return np.full_like(np.asarray(s, dtype=float), -np.inf)
        if self.lower is None:
            return -self.upper_at(s)
        return self._interp(self.lower, s)


def make_s_grid(k: int, s_min: float, eps: float = GRID_EPS) -> np.ndarray:
    """Grid -1, then -1 - tau with tau geometric from eps to (-s_min - 1):
    clustered at the terminal collapse and log-uniform at large -s."""
    if s_min >= -1.0:
        raise ValidationError(f"s_min must be < -1, got {s_min}")
    tau_max = -s_min - 1.0
    taus = eps * (tau_max / eps) ** (np.arange(k - 1) / (k - 2))
    return np.concatenate([[-1.0], -1.0 - taus])


def s_of_r(r: float, r0: float) -> float:
    """Clock map r in [0, 1] -> s in [-1 - 1/r0, -1]."""
    return -(r0 + 1.0) / (r0 + r)


def r_of_s(s: float, r0: float) -> float:
    """Inverse clock map; the round trip is exact up to rounding."""
    return -(r0 + (r0 + 1.0) / s)


def solve_c(cfg: SolverConfig = SolverConfig(), s_min: float = DEFAULT_S_MIN) -> StandardBoundary:
    """Backward trapezoidal solve of the symmetric standardized equation
    from c(-1) = 0 down to s_min, using the folded |W| kernel."""
    grid = make_s_grid(cfg.k, s_min)
    c = _kernels.solve_c_grid_symmetric(grid, cfg.inner_tol)
    sb = StandardBoundary(grid=grid, upper=c)
    res = residual_standard(sb)
    if res > RESIDUAL_CERTIFICATE:
        raise SolverError(
            f"standardized boundary fails the residual certificate: {res:.3e}"
        )
    return sb


def solve_cq(
    q: float, cfg: SolverConfig = SolverConfig(), s_min: float = DEFAULT_S_MIN
) -> StandardBoundary:
    """Coupled upper/lower solve of the asymmetric standardized problem.

    q = 0 reduces to the symmetric curve (through the genuinely two-sided
    recursion); q = inf solves the one-sided limit.
    """
    if not (q >= 0.0):
        raise ValidationError(f"q must be >= 0 (or inf), got {q}")
    grid = make_s_grid(cfg.k, s_min)
    if math.isinf(q):
        cu, _ = _kernels.solve_c_grid(grid, 0.0, True, cfg.inner_tol)
        return StandardBoundary(grid=grid, upper=cu, lower=None, stop_below=False)
    cu, cl = _kernels.solve_c_grid(grid, q, False, cfg.inner_tol)
    return StandardBoundary(grid=grid, upper=cu, lower=cl)


def residual_standard(sb: StandardBoundary) -> float:
    """Max interior-node defect of the discretized symmetric equation."""
    if sb.lower is not None or not sb.stop_below:
        raise ValidationError("residual is defined for symmetric standard boundaries")
    res = _kernels.residual_c_nodes(sb.grid, sb.upper)
    return float(np.max(res[1:]))


def posterior_mean_boundary(c: StandardBoundary, r0: float, r: float) -> float:
    """Symmetric stopping level for the posterior-mean process at trial
    time r: c(s(r)) / sqrt(r0 + 1)."""
    if not 0.0 <= r <= 1.0:
        raise ValidationError(f"r must lie in [0, 1], got {r}")
    if r0 < 0.0:
        raise ValidationError(f"r0 must be >= 0, got {r0}")
    if r0 == 0.0 and r == 0.0:
        raise RangeError("the uninformative prior maps r = 0 to s = -inf")
    return float(c.upper_at(s_of_r(r, r0))) / math.sqrt(r0 + 1.0)


def sum_boundaries(
    c: StandardBoundary, m0: float, r0: float, r: float
) -> tuple[float, Optional[float]]:
    """Upper and lower stopping levels for the response-sum process:
    -m0*r0 + (r0+r) c_+/-(s(r)) / sqrt(r0+1).  The lower level is None in
    the one-sided limit."""
    if not 0.0 <= r <= 1.0:
        raise ValidationError(f"r must lie in [0, 1], got {r}")
    if r0 < 0.0:
        raise ValidationError(f"r0 must be >= 0, got {r0}")
    if r0 == 0.0 and r == 0.0:
        raise RangeError("the uninformative prior maps r = 0 to s = -inf")
    s = s_of_r(r, r0)
    scale = (r0 + r) / math.sqrt(r0 + 1.0)
    bu = -m0 * r0 + scale * float(c.upper_at(s))
    if not c.stop_below:
        return bu, None
    bl = -m0 * r0 + scale * float(c.lower_at(s))
    return bu, bl


def pvalue_boundary(c: StandardBoundary, m0: float, r0: float, r: float) -> float:
    """Nominal one-sided p-value level below which stopping is optimal:
    1 - Phi(b_upper(r)/sqrt(r)).  Defined for r > 0."""
    if r <= 0.0:
        raise ValidationError(f"p-value boundary needs r > 0, got {r}")
    bu, _ = sum_boundaries(c, m0, r0, r)
    return 1.0 - std_normal_cdf(bu / math.sqrt(r))


def _penalty_factor(q: float) -> float:
    if not (q >= 0.0):
        raise ValidationError(f"q must be >= 0 (or inf), got {q}")
    if math.isinf(q):
        return 2.0
    return (1.0 + 2.0 * q) / (1.0 + q)


def asymptotic_cq(s: float, q: float = 0.0) -> float:
    """Deep-time closed form of the upper standardized boundary:
    sqrt(-s) * Phi^-1(1 + ((1+2q)/(1+q))/s)."""
    fac = _penalty_factor(q)
    if s > -1.0:
        raise ValidationError(f"asymptotic form needs s <= -1, got {s}")
    arg = 1.0 + fac / s
    if not 0.0 < arg < 1.0:
        raise ValidationError(
            f"asymptotic form needs -s > {fac} so the quantile argument is in (0, 1)"
        )
    return math.sqrt(-s) * std_normal_quantile(arg)


def pvalue_approx(r: float, r0: float = 0.0, m0: float = 0.0, q: float = 0.0) -> float:
    """Small-(r, r0) closed-form approximation of the p-value boundary.

    At r0 = 0 this is exactly ((1+2q)/(1+q)) * r; otherwise the quantile
    composition with the deep-time boundary form is evaluated.
    """
    fac = _penalty_factor(q)
    if r <= 0.0:
        raise ValidationError(f"p-value approximation needs r > 0, got {r}")
    if r0 < 0.0:
        raise ValidationError(f"r0 must be >= 0, got {r0}")
    if r0 == 0.0 and m0 == 0.0:
        out = fac * r
        if not 0.0 < out < 1.0:
            raise ValidationError(f"approximation leaves (0, 1): {out}")
        return out
    arg = 1.0 - fac * (r0 + r) / (r0 + 1.0)
    if not 0.0 < arg < 1.0:
        raise ValidationError(
            f"quantile argument {arg} outside (0, 1); r and r0 are too large"
        )
    inner = -m0 * r0 + math.sqrt(r0 + r) * std_normal_quantile(arg)
    return 1.0 - std_normal_cdf(inner / math.sqrt(r))


CLASSICAL_ACCEPTS_MORE = "classical_accepts_more"
OPTIMAL_ACCEPTS_MORE = "optimal_accepts_more"
EQUAL = "equal"


@dataclass(frozen=True)
class ClassicalComparison:
    classical: float
    optimal: float
    verdict: str


def classical_rule_compare(
    alpha: float,
    r: float,
    q: float = 0.0,
    r0: float = 0.0,
    m0: float = 0.0,
    b_p_optimal: Optional[float] = None,
) -> ClassicalComparison:
    """Compare the two-independent-studies rule (p-value threshold alpha^2)
    against the optimal p-value boundary at trial fraction r.

    The rule with the larger threshold accepts in more outcomes.  A solved
    boundary value may be passed to override the closed-form approximation.
    """
    if not 0.0 < alpha < 1.0:
        raise ValidationError(f"alpha must lie in (0, 1), got {alpha}")
    classical = alpha * alpha
    optimal = pvalue_approx(r, r0, m0, q) if b_p_optimal is None else b_p_optimal
    if math.isclose(classical, optimal, rel_tol=1e-12, abs_tol=0.0):
        verdict = EQUAL
    elif classical > optimal:
        verdict = CLASSICAL_ACCEPTS_MORE
    else:
        verdict = OPTIMAL_ACCEPTS_MORE
    return ClassicalComparison(classical=classical, optimal=optimal, verdict=verdict)


# ---------------------------------------------------------------------------
# CSV interface: header s,c_upper,c_lower; ascending s; 17 significant digits
# ---------------------------------------------------------------------------


def _fmt(x: float) -> str:
    return format(x, ".17g")


def standard_boundary_to_csv(sb: StandardBoundary) -> str:
    lines = ["s,c_upper,c_lower"]
    n = len(sb.grid)
    for i in range(n - 1, -1, -1):
        if sb.lower is not None:
            lo = _fmt(sb.lower[i])
        elif not sb.stop_below:
            lo = "-inf"
        else:
            lo = ""
        lines.append(f"{_fmt(sb.grid[i])},{_fmt(sb.upper[i])},{lo}")
    return "\n".join(lines) + "\n"


def standard_boundary_from_csv(text: str) -> StandardBoundary:
    lines = [ln for ln in text.strip().splitlines() if ln.strip()]
    if not lines or lines[0].strip() != "s,c_upper,c_lower":
        raise ValidationError("standard boundary CSV must start with s,c_upper,c_lower")
    rows = []
    for ln in lines[1:]:
        parts = ln.split(",")
        if len(parts) != 3:
            raise ValidationError(f"malformed standard boundary CSV row: {ln!r}")
        rows.append(parts)
    try:
        grid = np.array([float(p[0]) for p in rows])[::-1]
        upper = np.array([float(p[1]) for p in rows])[::-1]
    except ValueError as exc:
        raise ValidationError(f"non-numeric standard boundary cell: {exc}") from exc
    lower_cells = [p[2].strip() for p in rows]
    if all(c == "" for c in lower_cells):
        return StandardBoundary(grid=grid, upper=upper)
    if all(c == "-inf" for c in lower_cells):
        return StandardBoundary(grid=grid, upper=upper, lower=None, stop_below=False)
    try:
        lower = np.array([float(cell) for cell in lower_cells])[::-1]
    except ValueError as exc:
        raise ValidationError(f"non-numeric lower-curve cell: {exc}") from exc
    return StandardBoundary(grid=grid, upper=upper, lower=lower)
