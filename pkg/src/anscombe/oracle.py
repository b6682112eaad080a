"""Independent verification engines: binomial-tree value iteration on the
random-walk lattice and Monte Carlo policy evaluation with reproducible
per-path random streams.

The tree discretizes time in steps dt and space in sqrt(dt), replacing the
Gaussian increment by a fair coin; the value recursion is
V = max(G, average of the two successors).  Monte Carlo evaluates a given
stopping boundary two ways: simulating the drifted model and paying the
realized utility (policy value), or simulating the driftless model and
paying the discounted h-function at the stopping state (transformed value);
the two estimates target the same number, which is the cross-check.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

from . import _kernels
from ._kernels import _fallback
from .errors import ResourceError, SolverError, ValidationError
from .horizon import (
    ExponentialHorizon,
    FixedHorizon,
    HorizonModel,
    LomaxHorizon,
    f_tilde,
)
from .normal_conjugate import StandardBoundary
from .priors import NormalConjugate, Prior, atoms, is_symmetric
from .volterra import Boundary

EXTRACT_REL_TOL = 1e-12
MAX_VALUE_CELLS = 30_000_000

_MAX_SEED = 2**63


# ---------------------------------------------------------------------------
# Rewards
# ---------------------------------------------------------------------------


class TrialReward:
    """Discounted trial reward f(t) * (|h(t, y)| + 2q h(t, y)+) for a
    mixture prior; q = inf selects the one-sided limit f(t) * h(t, y)+.

    Without a horizon model the fixed-horizon discount (1 - t)+ applies.
    """

    def __init__(self, prior: Prior, q: float = 0.0, horizon: Optional[HorizonModel] = None):
        if isinstance(prior, NormalConjugate):
            raise ValidationError(
                "tree rewards need a mixture prior; normal priors use the "
                "standardized reward on the s-clock"
            )
        if not (q >= 0.0):
            raise ValidationError(f"q must be >= 0 (or inf), got {q}")
        self.prior = prior
        self.q = q
        self.one_sided = math.isinf(q)
        self.horizon = horizon
        self.pts, self.wts = atoms(prior)

    def time_factor(self, t: float) -> float:
        if self.horizon is None:
            return max(1.0 - t, 0.0)
        return f_tilde(self.horizon, t)

    def __call__(self, t, y):
        y = np.asarray(y, dtype=float)
        h = np.zeros_like(y)
        for p, w in zip(self.pts, self.wts):
            h += (w * p * math.exp(-0.5 * p * p * t)) * np.exp(p * y)
        if self.one_sided:
            psi = np.maximum(h, 0.0)
        else:
            psi = np.abs(h) + (2.0 * self.q) * np.maximum(h, 0.0)
        return self.time_factor(t) * psi


class StandardizedReward:
    """Reward (1 + 1/s)(|y| + 2q y+) of the conjugate-normal problem on the
    s-clock; q = inf selects (1 + 1/s) y+."""

    def __init__(self, q: float = 0.0):
        if not (q >= 0.0):
            raise ValidationError(f"q must be >= 0 (or inf), got {q}")
        self.q = q
        self.one_sided = math.isinf(q)

    def time_factor(self, s: float) -> float:
        return 1.0 + 1.0 / s

    def __call__(self, s, y):
        y = np.asarray(y, dtype=float)
        if self.one_sided:
            psi = np.maximum(y, 0.0)
        else:
            psi = np.abs(y) + (2.0 * self.q) * np.maximum(y, 0.0)
        return self.time_factor(s) * psi


Reward = Union[TrialReward, StandardizedReward, Callable[[float, np.ndarray], np.ndarray]]


# ---------------------------------------------------------------------------
# Value iteration
# ---------------------------------------------------------------------------


@dataclass(eq=False)
class ValueGrid:
    """Backward-induction output on the random-walk lattice.

    times runs from the terminal time down in steps of dt; the space grid
    has spacing dy = sqrt(dt) exactly.  upper/lower hold the per-slice
    smallest |y| where the value meets the reward; flags mark slices where
    no such point exists on one side (recorded at the grid top sentinel).
    values is retained only when requested.
    """

    times: np.ndarray
    dt: float
    dy: float
    y: np.ndarray
    upper: np.ndarray
    lower: np.ndarray
    upper_flag: np.ndarray
    lower_flag: np.ndarray
    time_axis: str
    reward_tag: str
    values: Optional[np.ndarray] = None


def value_iteration(
    reward: Reward,
    t_span: tuple[float, float],
    dt: float,
    y_max: Optional[float] = None,
    keep_values: bool = False,
) -> ValueGrid:
    """Run backward induction for ``reward`` from t_span[0] (terminal) down
    to t_span[1] in steps of dt, on the space lattice of pitch sqrt(dt)."""
    terminal, stop = t_span
    if dt <= 0.0:
        raise ValidationError(f"dt must be positive, got {dt}")
    if stop >= terminal:
        raise ValidationError(f"t_span must decrease, got {t_span}")
    n = int(round((terminal - stop) / dt))
    if n < 1:
        raise ValidationError("t_span shorter than one step")
    times = terminal - dt * np.arange(n + 1)
    dy = math.sqrt(dt)
    if y_max is None:
        y_max = 6.0 * math.sqrt(terminal - stop) + 2.0
    half = int(math.ceil(y_max / dy))
    ny = 2 * half + 1
    if (n + 1 if keep_values else 2) * ny > MAX_VALUE_CELLS:
        raise ResourceError(
            f"value grid needs {(n + 1) * ny} cells; raise MAX_VALUE_CELLS or "
            "drop keep_values"
        )
    y = (np.arange(ny) - half) * dy

    if isinstance(reward, TrialReward):
        tf = np.array([reward.time_factor(t) for t in times])
        E = np.exp(np.outer(reward.pts, y))
        q = 0.0 if reward.one_sided else reward.q
        out = _kernels.tree_mixture(
            reward.pts, reward.wts, E, q, times, tf, y, dy,
            reward.one_sided, EXTRACT_REL_TOL, keep_values,
        )
        tag = "trial"
    elif isinstance(reward, StandardizedReward):
        tf = 1.0 + 1.0 / times
        q = 0.0 if reward.one_sided else reward.q
        out = _kernels.tree_abs(
            q, times, tf, y, dy, reward.one_sided, EXTRACT_REL_TOL, keep_values
        )
        tag = "standardized"
    else:
        out = _fallback.tree_generic(reward, times, y, dy, EXTRACT_REL_TOL, keep_values)
        tag = "generic"

    upper, lower, uflag, lflag, values = out
    axis = "r" if terminal > 0.0 else "s"
    return ValueGrid(
        times=times, dt=dt, dy=dy, y=y, upper=upper, lower=lower,
        upper_flag=uflag, lower_flag=lflag, time_axis=axis,
        reward_tag=tag, values=values,
    )


def extract_boundary(vg: ValueGrid) -> Union[Boundary, StandardBoundary]:
    """Package the per-slice value/reward crossings as a boundary object.

    Raises SolverError when an unflagged crossing sits within two cells of
    the lattice top, which would mean the truncation height was too small.
    """
    top = vg.y[-1]
    ok_u = ~vg.upper_flag
    ok_l = ~vg.lower_flag
    if np.any(vg.upper[ok_u] > top - 2.0 * vg.dy) or np.any(
        -vg.lower[ok_l] > top - 2.0 * vg.dy
    ):
        raise SolverError(
            "extracted boundary reaches within two cells of the lattice top; "
            "re-run with a larger y_max"
        )
    one_sided = bool(np.all(vg.lower_flag[1:]))
    cls = Boundary if vg.time_axis == "r" else StandardBoundary
    if one_sided:
        return cls(grid=vg.times, upper=vg.upper, lower=None, stop_below=False)
    return cls(grid=vg.times, upper=vg.upper, lower=vg.lower)


# ---------------------------------------------------------------------------
# Monte Carlo
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PolicyValueEstimate:
    """Sample mean and standard error of a simulated stopping-rule value."""

    mean: float
    std_error: float
    n_paths: int
    seed: int
    step: float

    def to_json(self) -> dict:
        return {
            "mean": self.mean,
            "std_error": self.std_error,
            "n_paths": self.n_paths,
            "seed": self.seed,
            "step": self.step,
        }


def _default_threads(threads: Optional[int]) -> int:
    if threads is not None:
        return max(1, int(threads))
    env = os.environ.get("ANSCOMBE_THREADS", "").strip()
    return max(1, int(env)) if env else 1


def _encode_prior(prior: Prior, need_draws: bool):
    if isinstance(prior, NormalConjugate):
        if need_draws and prior.r0 <= 0.0:
            raise ValidationError(
                "policy simulation draws the effect from the prior; the "
                "uninformative normal prior (r0 = 0) cannot be sampled"
            )
        empty = np.empty(0)
        return _fallback.PRIOR_NORMAL, empty, empty, empty, prior.m0, prior.r0
    pts, wts = atoms(prior)
    cum = np.cumsum(wts)
    cum[-1] = 1.0
    return _fallback.PRIOR_MIXTURE, pts, wts, cum, 0.0, 0.0


def _encode_horizon(horizon: Optional[HorizonModel]):
    if horizon is None or isinstance(horizon, FixedHorizon):
        return _fallback.HORIZON_FIXED, 0.0
    if isinstance(horizon, ExponentialHorizon):
        return _fallback.HORIZON_EXPONENTIAL, 0.0
    if isinstance(horizon, LomaxHorizon):
        return _fallback.HORIZON_LOMAX, horizon.omega
    raise ValidationError(
        "Monte Carlo supports fixed, exponential, and Lomax horizons; "
        "tabulated discounts have no path sampler"
    )


def _monitor_arrays(boundary, step: float, n_cap: int):
    """Boundary levels at the monitor times i*step, i = 0..n_cap."""
    t = step * np.arange(n_cap + 1)
    if isinstance(boundary, Boundary):
        if boundary.grid[-1] > step * (1.0 + 1e-9):
            raise ValidationError(
                f"boundary grid starts at r = {boundary.grid[-1]:.3g} but "
                f"monitoring begins at {step:.3g}; solve down to r_min <= step"
            )
        upper = boundary.upper_at(t)
        lower = np.asarray(boundary.lower_at(t), dtype=float)
        return np.ascontiguousarray(upper), np.ascontiguousarray(lower)
    if isinstance(boundary, tuple):
        up, lo = boundary
        upper = np.full(n_cap + 1, float(up))
        lower = np.full(n_cap + 1, -math.inf if lo is None else float(lo))
        return upper, lower
    level = float(boundary)
    if level <= 0.0:
        raise ValidationError(f"constant threshold must be positive, got {level}")
    return np.full(n_cap + 1, level), np.full(n_cap + 1, -level)


def _check_mc_args(n_paths: int, step: float, seed: int):
    if n_paths < 1:
        raise ValidationError(f"n_paths must be >= 1, got {n_paths}")
    if step <= 0.0:
        raise ValidationError(f"step must be positive, got {step}")
    if not 0 <= seed < _MAX_SEED:
        raise ValidationError(f"seed must lie in [0, 2^63), got {seed}")


def _mc_worker(args):
    idx, kernel_args = args
    return idx, _kernels.mc_chunk(*kernel_args)


def _ou_worker(args):
    idx, kernel_args = args
    return idx, _kernels.ou_chunk(*kernel_args)


def _reduce_chunks(worker, jobs, threads: int):
    if threads <= 1:
        results = [worker(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(worker, jobs))
    total = 0.0
    total_sq = 0.0
    for _, (s, ss) in sorted(results, key=lambda t: t[0]):
        total += s
        total_sq += ss
    return total, total_sq


def _estimate(total, total_sq, n_paths, seed, step):
    mean = total / n_paths
    if n_paths > 1:
        var = max(total_sq - n_paths * mean * mean, 0.0) / (n_paths - 1)
    else:
        var = 0.0
    return PolicyValueEstimate(
        mean=mean, std_error=math.sqrt(var / n_paths),
        n_paths=n_paths, seed=seed, step=step,
    )


def _run_mc(mode, prior, boundary, q, horizon, n_paths, step, seed, threads, t_cap):
    _check_mc_args(n_paths, step, seed)
    if not (q >= 0.0) or math.isinf(q):
        raise ValidationError(f"Monte Carlo needs finite q >= 0, got {q}")
    pk, pts, wts, cum, m0, r0 = _encode_prior(prior, mode == _fallback.MC_POLICY)
    hk, omega = _encode_horizon(horizon)
    if hk == _fallback.HORIZON_FIXED:
        n_cap = int(round(1.0 / step))
    else:
        n_cap = int(math.ceil((64.0 if t_cap is None else t_cap) / step))
    upper, lower = _monitor_arrays(boundary, step, n_cap)
    jobs = [
        (
            ci,
            (
                mode, pk, pts, wts, cum, m0, r0, hk, omega, q,
                upper, lower, step, n_cap, seed, lo, min(lo + _fallback.PATH_CHUNK, n_paths),
            ),
        )
        for ci, lo in enumerate(range(0, n_paths, _fallback.PATH_CHUNK))
    ]
    total, total_sq = _reduce_chunks(_mc_worker, jobs, _default_threads(threads))
    return _estimate(total, total_sq, n_paths, seed, step)


def mc_policy_value(
    prior: Prior,
    boundary,
    q: float = 0.0,
    horizon: Optional[HorizonModel] = None,
    *,
    n_paths: int,
    step: float,
    seed: int,
    threads: Optional[int] = None,
    t_cap: Optional[float] = None,
) -> PolicyValueEstimate:
    """Simulate the drifted model under ``boundary`` and average the
    realized utility.

    Per path: the effect is drawn from the prior, the horizon (if random)
    is drawn independently, the response-sum path takes Euler steps, stops
    at the first monitor time past the boundary or at the horizon, and pays
    effect * ((q+1) * remaining * decision - q * stop_time) with the
    decision taken by the sign of the h-function at the stopping state.
    """
    return _run_mc(
        _fallback.MC_POLICY, prior, boundary, q, horizon,
        n_paths, step, seed, threads, t_cap,
    )


def mc_transformed_value(
    prior: Prior,
    boundary,
    q: float = 0.0,
    horizon: Optional[HorizonModel] = None,
    *,
    n_paths: int,
    step: float,
    seed: int,
    threads: Optional[int] = None,
    t_cap: Optional[float] = None,
) -> PolicyValueEstimate:
    """Simulate the driftless model under the same stopping logic and pay
    the discounted h-magnitude (plus asymmetric penalty) at the stopping
    state.

    By the change of measure this targets the same value as
    mc_policy_value whenever the prior has zero mean (for q = 0, any
    prior); the pair is the simulation cross-check.
    """
    if isinstance(prior, NormalConjugate) and prior.r0 <= 0.0:
        raise ValidationError(
            "the transformed payoff needs a proper normal prior (r0 > 0)"
        )
    return _run_mc(
        _fallback.MC_TRANSFORMED, prior, boundary, q, horizon,
        n_paths, step, seed, threads, t_cap,
    )


def mc_mean_stop_time(
    threshold: float,
    *,
    n_paths: int,
    step: float,
    seed: int,
    threads: Optional[int] = None,
    t_cap: Optional[float] = None,
) -> PolicyValueEstimate:
    """Mean first time a driftless path leaves (-threshold, threshold),
    monitored on the step grid (capped far beyond the typical exit)."""
    _check_mc_args(n_paths, step, seed)
    if threshold <= 0.0:
        raise ValidationError(f"threshold must be positive, got {threshold}")
    cap = t_cap if t_cap is not None else max(40.0 * threshold * threshold, 4.0)
    n_cap = int(math.ceil(cap / step))
    upper = np.full(n_cap + 1, threshold)
    lower = np.full(n_cap + 1, -threshold)
    empty = np.empty(0)
    jobs = [
        (
            ci,
            (
                _fallback.MC_STOP_TIME, _fallback.PRIOR_MIXTURE, empty, empty, empty,
                0.0, 0.0, _fallback.HORIZON_FIXED, 0.0, 0.0,
                upper, lower, step, n_cap, seed, lo, min(lo + _fallback.PATH_CHUNK, n_paths),
            ),
        )
        for ci, lo in enumerate(range(0, n_paths, _fallback.PATH_CHUNK))
    ]
    total, total_sq = _reduce_chunks(_mc_worker, jobs, _default_threads(threads))
    return _estimate(total, total_sq, n_paths, seed, step)


def mc_ou_discounted_value(
    threshold: float,
    discount_rate: float,
    *,
    n_paths: int,
    step: float,
    seed: int,
    threads: Optional[int] = None,
    t_cap: Optional[float] = None,
) -> PolicyValueEstimate:
    """Value of the constant-threshold rule on the discounted outward
    diffusion dX = X dt + sqrt(2) dB from X = 0: pays
    exp(-rate * t) |X_t| at the first |X| >= threshold."""
    _check_mc_args(n_paths, step, seed)
    if threshold <= 0.0 or discount_rate <= 0.0:
        raise ValidationError("threshold and discount_rate must be positive")
    cap = t_cap if t_cap is not None else 30.0 / discount_rate
    n_cap = int(math.ceil(cap / step))
    jobs = [
        (
            ci,
            (threshold, discount_rate, step, n_cap, seed, lo,
             min(lo + _fallback.PATH_CHUNK, n_paths)),
        )
        for ci, lo in enumerate(range(0, n_paths, _fallback.PATH_CHUNK))
    ]
    total, total_sq = _reduce_chunks(_ou_worker, jobs, _default_threads(threads))
    return _estimate(total, total_sq, n_paths, seed, step)
