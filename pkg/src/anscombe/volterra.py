"""Stopping-boundary solvers for symmetric mixture priors and the
asymmetric extension, on the standardized trial clock r in (0, 1].

The boundary solves a Volterra equation of the second kind: the discounted
h-function at the boundary equals the time integral of one-sided tail
expectations of the h-function over the stopping region.  It is discretized
by the trapezoid rule on a backward grid from the terminal collapse b(1)=0
and solved one scalar root per node; a fixed-point sweep of the equivalent
operator form is provided as an independent scheme.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _kernels
from .errors import ConvergenceError, SolverError, ValidationError
from .numerics import std_normal_cdf
from .priors import Prior, atoms, is_symmetric

RESIDUAL_CERTIFICATE = 1e-3

GRID_SHAPES = ("sqrt", "uniform")


@dataclass(frozen=True)
class SolverConfig:
    """Grid and tolerance settings for the backward solvers.

    grid_shape 'sqrt' clusters nodes near the terminal time where the
    boundary collapses with square-root-type curvature.
    """

    k: int = 2000
    grid_shape: str = "sqrt"
    inner_tol: float = 1e-10
    fp_max_iter: int = 3000
    fp_tol: float = 1e-5
    r_min: float = 1e-4

    def __post_init__(self):
        if self.k < 3:
            raise ValidationError(f"grid size must be >= 3, got {self.k}")
        if self.grid_shape not in GRID_SHAPES:
            raise ValidationError(f"grid_shape must be one of {GRID_SHAPES}")
        if self.inner_tol <= 0.0 or self.fp_tol <= 0.0:
            raise ValidationError("tolerances must be positive")
        if self.fp_max_iter < 1:
            raise ValidationError("fp_max_iter must be >= 1")
        if not 0.0 < self.r_min < 1.0:
            raise ValidationError(f"r_min must lie in (0, 1), got {self.r_min}")


@dataclass(frozen=True)
class AsymmetricSpec:
    """Standard-treatment load: q patients outside the trial per patient
    inside; math.inf selects the limiting one-sided problem."""

    q: float

    def __post_init__(self):
        if not (self.q >= 0.0):
            raise ValidationError(f"q must be >= 0 (or inf), got {self.q}")

    @property
    def is_infinite(self) -> bool:
        return math.isinf(self.q)


@dataclass(eq=False)
class Boundary:
    """Time-indexed stopping boundary on a decreasing grid from r = 1.

    lower is None for symmetric boundaries (lower = -upper); stop_below
    False marks the one-sided limit where no lower stopping exists at all.
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
            raise ValidationError("boundary needs matching 1-d grid and upper arrays")
        if g[0] != 1.0:
            raise ValidationError(f"boundary grid must start at r = 1, got {g[0]}")
        if np.any(np.diff(g) >= 0.0) or g[-1] <= 0.0:
            raise ValidationError("boundary grid must decrease strictly within (0, 1]")
        if not np.all(np.isfinite(u)) or np.any(u < 0.0) or u[0] != 0.0:
            raise ValidationError("upper boundary must be finite, >= 0, and 0 at r = 1")
        if self.lower is not None:
            if not self.stop_below:
                raise ValidationError("stop_below=False requires lower=None")
            self.lower = np.asarray(self.lower, dtype=float)
            lo = self.lower
            if lo.shape != g.shape or not np.all(np.isfinite(lo)):
                raise ValidationError("lower boundary must be finite and match the grid")
            if np.any(lo > 0.0) or lo[0] != 0.0:
                raise ValidationError("lower boundary must be <= 0 and 0 at r = 1")
            # strictness is waived where the upper boundary itself sits at 0
            # (grid-snapped near-terminal nodes of tree-extracted boundaries)
            bad = (lo[1:] >= u[1:]) & (u[1:] > 0.0)
            if np.any(bad):
                raise ValidationError("lower boundary must stay below upper for r < 1")

    @property
    def is_symmetric(self) -> bool:
        return self.lower is None and self.stop_below

    def upper_at(self, r):
        return np.interp(r, self.grid[::-1], self.upper[::-1])

    def lower_at(self, r):
        if not self.stop_below:
            return np.full_like(np.asarray(r, dtype=float), -np.inf)
        if self.lower is None:
            return -self.upper_at(r)
        return np.interp(r, self.grid[::-1], self.lower[::-1])


def make_r_grid(cfg: SolverConfig) -> np.ndarray:
    k = cfg.k
    if cfg.grid_shape == "uniform":
        return np.linspace(1.0, cfg.r_min, k)
    frac = np.arange(k) / (k - 1)
    return 1.0 - frac * frac * (1.0 - cfg.r_min)


def _mixture_atoms(prior: Prior, op: str):
    try:
        pts, wts = atoms(prior)
    except ValidationError as exc:
        raise ValidationError(f"{op}: {exc}") from exc
    return pts, wts


def _symmetric_atoms(prior: Prior, op: str):
    pts, wts = _mixture_atoms(prior, op)
    if not is_symmetric(prior):
        raise ValidationError(f"{op} requires a symmetric prior")
    return pts, wts


def kernel_K(prior: Prior, u: float, r: float, z: float, y: float) -> float:
    """Tail expectation E[h(u, |S_u|); |S_u| >= z] from start (r, y),
    written with normal CDFs and summed over the prior atoms."""
    if not u > r >= 0.0:
        raise ValidationError(f"kernel needs u > r >= 0, got u={u}, r={r}")
    if z < 0.0:
        raise ValidationError(f"kernel needs z >= 0, got z={z}")
    pts, wts = _mixture_atoms(prior, "kernel_K")
    v = u - r
    sq = math.sqrt(v)
    total = 0.0
    for p, w in zip(pts, wts):
        phi_p = std_normal_cdf((p * v - z + y) / sq)
        phi_m = std_normal_cdf((p * v - z - y) / sq)
        # each atom's two tails are summed first, keeping the whole kernel
        # exactly invariant under y -> -y for any atom set
        term = 0.0
        if phi_p != 0.0:
            term += w * p * math.exp(p * y - 0.5 * p * p * r) * phi_p
        if phi_m != 0.0:
            term += w * p * math.exp(-p * y - 0.5 * p * p * r) * phi_m
        total += term
    return total


def kernel_diagonal(prior: Prior, r: float, b: float) -> float:
    """Coincident-time limit of kernel_K along a differentiable boundary:
    half the atom sum of w * d * exp(d*b - d^2 r/2)."""
    if r < 0.0:
        raise ValidationError(f"kernel_diagonal needs r >= 0, got {r}")
    pts, wts = _mixture_atoms(prior, "kernel_diagonal")
    total = 0.0
    for p, w in zip(pts, wts):
        total += w * p * math.exp(p * b - 0.5 * p * p * r)
    return 0.5 * total


def solve_symmetric(prior: Prior, cfg: SolverConfig = SolverConfig()) -> Boundary:
    """Backward trapezoidal solve of the symmetric boundary equation.

    The returned boundary carries the residual certificate: the discretized
    equation holds to RESIDUAL_CERTIFICATE at every interior node.
    """
    pts, wts = _symmetric_atoms(prior, "solve_symmetric")
    grid = make_r_grid(cfg)
    b = _kernels.solve_symmetric_grid(pts, wts, grid, cfg.inner_tol)
    boundary = Boundary(grid=grid, upper=b)
    res = residual(prior, boundary)
    if res > RESIDUAL_CERTIFICATE:
        raise SolverError(
            f"solved boundary fails the residual certificate: {res:.3e} > "
            f"{RESIDUAL_CERTIFICATE}"
        )
    return boundary


def residual(prior: Prior, boundary: Boundary) -> float:
    """Max interior-node defect of the discretized symmetric equation; the
    machine-checkable uniqueness certificate for a candidate boundary."""
    if not boundary.is_symmetric:
        raise ValidationError("residual is defined for symmetric boundaries")
    pts, wts = _symmetric_atoms(prior, "residual")
    res = _kernels.residual_symmetric_nodes(pts, wts, boundary.grid, boundary.upper)
    return float(np.max(res[1:]))


@dataclass(frozen=True)
class FixedPointResult:
    boundary: Boundary
    iterations: int
    final_change: float


def solve_fixed_point(prior: Prior, cfg: SolverConfig = SolverConfig()) -> FixedPointResult:
    """Iterate the operator form b -> b + integral - g from b = 0 until the
    sup-norm change drops below fp_tol."""
    pts, wts = _symmetric_atoms(prior, "solve_fixed_point")
    grid = make_r_grid(cfg)
    b = np.zeros(cfg.k)
    change = math.inf
    for it in range(1, cfg.fp_max_iter + 1):
        nxt = _kernels.fixed_point_sweep(pts, wts, grid, b)
        change = float(np.max(np.abs(nxt - b)))
        b = nxt
        if change <= cfg.fp_tol:
            return FixedPointResult(Boundary(grid=grid, upper=b), it, change)
    raise ConvergenceError(
        f"fixed-point iteration did not reach {cfg.fp_tol} within "
        f"{cfg.fp_max_iter} sweeps (last change {change:.3e})",
        last_iterate=FixedPointResult(Boundary(grid=grid, upper=b), cfg.fp_max_iter, change),
    )


def solve_asymmetric(
    prior: Prior, spec: AsymmetricSpec, cfg: SolverConfig = SolverConfig()
) -> Boundary:
    """Coupled upper/lower boundary solve for the asymmetric problem.

    At q = 0 this reproduces the symmetric solution through the two-sided
    recursion; at q = inf only the upper boundary exists and the result is
    flagged stop_below=False.
    """
    pts, wts = _symmetric_atoms(prior, "solve_asymmetric")
    grid = make_r_grid(cfg)
    if spec.is_infinite:
        bu, _ = _kernels.solve_asymmetric_grid(pts, wts, grid, 0.0, True, cfg.inner_tol)
        return Boundary(grid=grid, upper=bu, lower=None, stop_below=False)
    bu, bl = _kernels.solve_asymmetric_grid(pts, wts, grid, spec.q, False, cfg.inner_tol)
    return Boundary(grid=grid, upper=bu, lower=bl)


# ---------------------------------------------------------------------------
# CSV interface: header r,b_upper,b_lower; ascending r; 17 significant digits
# ---------------------------------------------------------------------------


def _fmt(x: float) -> str:
    return format(x, ".17g")


def boundary_to_csv(boundary: Boundary) -> str:
    lines = ["r,b_upper,b_lower"]
    n = len(boundary.grid)
    for i in range(n - 1, -1, -1):
        r = boundary.grid[i]
        up = boundary.upper[i]
        if boundary.lower is not None:
            lo = _fmt(boundary.lower[i])
        elif not boundary.stop_below:
            lo = "-inf"
        else:
            lo = ""
        lines.append(f"{_fmt(r)},{_fmt(up)},{lo}")
    return "\n".join(lines) + "\n"


def boundary_from_csv(text: str) -> Boundary:
    lines = [ln for ln in text.strip().splitlines() if ln.strip()]
    if not lines or lines[0].strip() != "r,b_upper,b_lower":
        raise ValidationError("boundary CSV must start with header r,b_upper,b_lower")
    rows = []
    for ln in lines[1:]:
        parts = ln.split(",")
        if len(parts) != 3:
            raise ValidationError(f"malformed boundary CSV row: {ln!r}")
        rows.append(parts)
    try:
        grid = np.array([float(p[0]) for p in rows])[::-1]
        upper = np.array([float(p[1]) for p in rows])[::-1]
    except ValueError as exc:
        raise ValidationError(f"non-numeric boundary CSV cell: {exc}") from exc
    lower_cells = [p[2].strip() for p in rows]
    if all(c == "" for c in lower_cells):
        return Boundary(grid=grid, upper=upper)
    if all(c == "-inf" for c in lower_cells):
        return Boundary(grid=grid, upper=upper, lower=None, stop_below=False)
    try:
        lower = np.array([float(c) for c in lower_cells])[::-1]
    except ValueError as exc:
        raise ValidationError(f"non-numeric lower-boundary cell: {exc}") from exc
    return Boundary(grid=grid, upper=upper, lower=lower)
