"""Pure numpy/Python reference implementation of the hot kernels.

Grid conventions: time grids are strictly decreasing from the terminal
time (r-grids start at 1, s-grids at -1).  Node 0 is the terminal node
where every boundary collapses to 0; node i is solved from nodes 0..i-1.

The Monte Carlo kernels draw from per-path Philox substreams keyed by
(seed, path index) and accumulate payoffs in fixed path order, so results
are independent of chunking and match the compiled backend bit for bit
(path stepping uses only +,* on stream values; payoffs use scalar libm
calls mirrored exactly in the extension).
"""

from __future__ import annotations

import math

import numpy as np
from numpy.random import Generator, Philox
from scipy.special import ndtr

from ..errors import SolverError
from ..numerics import RootBracket, find_root

_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)

# Monte Carlo layout constants shared with the compiled backend.
PATH_CHUNK = 4096
STEP_CHUNK = 8192

MC_POLICY = 0
MC_TRANSFORMED = 1
MC_STOP_TIME = 2

PRIOR_MIXTURE = 0
PRIOR_NORMAL = 1

HORIZON_FIXED = 0
HORIZON_EXPONENTIAL = 1
HORIZON_LOMAX = 2


def _phi(x):
    return _INV_SQRT_2PI * np.exp(-0.5 * x * x)


def _trap_coefs(tgrid: np.ndarray, i: int) -> np.ndarray:
    """Trapezoid node weights for the integral over [t_i, t_0] on nodes 0..i."""
    d = tgrid[:i] - tgrid[1 : i + 1]
    coef = np.empty(i + 1)
    coef[0] = 0.5 * d[0]
    if i > 1:
        coef[1:i] = 0.5 * (d[:-1] + d[1:])
    coef[i] = 0.5 * d[-1]
    return coef


def _solve_step(F, anchor: float, ceiling: float, inner_tol: float, step_label: str,
                downward: bool = False) -> float:
    """Solve F = 0 for one backward step.

    F must be negative at 0; the outer endpoint is expanded geometrically
    from the previous node's value (continuity) until the sign flips, then
    the root is bracketed to width inner_tol.  ``downward`` mirrors the
    search into the negative half-line for lower boundaries.
    """
    f0 = F(0.0)
    if f0 == 0.0:
        return 0.0
    if f0 > 0.0:
        raise SolverError(f"{step_label}: equation has no sign change from 0 (F(0)={f0})")
    inc = 0.5
    hi = None
    while True:
        cand = anchor + inc
        if cand > ceiling:
            cand = ceiling
        fc = F(-cand if downward else cand)
        if fc > 0.0:
            hi = cand
            break
        if fc == 0.0:
            return -cand if downward else cand
        if cand >= ceiling:
            raise SolverError(
                f"{step_label}: no sign change up to bracket ceiling {ceiling:.6g}"
            )
        inc *= 2.0
    if downward:
        root = find_root(lambda t: F(-t), RootBracket(0.0, hi, tol=inner_tol, max_iter=400))
        return -root
    return find_root(F, RootBracket(0.0, hi, tol=inner_tol, max_iter=400))


# ---------------------------------------------------------------------------
# Symmetric problem on the r-grid (mixture priors)
# ---------------------------------------------------------------------------


def _h_mix(pts, wts, r, y):
    return float(np.sum(wts * pts * np.exp(pts * y - 0.5 * pts * pts * r)))


def _half_sum(pts, wts, r, y):
    return 0.5 * _h_mix(pts, wts, r, y)


class _SymStep:
    """Off-diagonal kernel column for one backward step of the symmetric
    equation: K(u_j, r, b_j, y) summed over prior atoms, vectorized in j."""

    def __init__(self, pts, wts, r, u, z):
        v = u - r
        self.inv = 1.0 / np.sqrt(v)
        # argbase[a, j] = (p_a (u_j - r) - z_j) / sqrt(u_j - r)
        self.argbase = (pts[:, None] * v[None, :] - z[None, :]) * self.inv[None, :]
        self.pts = pts
        self.wts = wts
        self.r = r

    def column(self, y: float) -> np.ndarray:
        shift = y * self.inv
        up = ndtr(self.argbase + shift[None, :])
        dn = ndtr(self.argbase - shift[None, :])
        ep = self.wts * self.pts * np.exp(self.pts * y - 0.5 * self.pts * self.pts * self.r)
        em = self.wts * self.pts * np.exp(-self.pts * y - 0.5 * self.pts * self.pts * self.r)
        with np.errstate(invalid="ignore"):
            term = np.where(up == 0.0, 0.0, ep[:, None] * up)
            term += np.where(dn == 0.0, 0.0, em[:, None] * dn)
        return term.sum(axis=0)


def _symmetric_F(pts, wts, rgrid, b, i):
    """Residual function y -> g(r_i, y) - trapezoid(kernel) given b[0..i-1]."""
    r = rgrid[i]
    coef = _trap_coefs(rgrid, i)
    step = _SymStep(pts, wts, r, rgrid[:i], b[:i])
    one_minus_r = 1.0 - r

    def F(y: float) -> float:
        g = one_minus_r * _h_mix(pts, wts, r, y)
        integral = float(coef[:i] @ step.column(y)) + coef[i] * _half_sum(pts, wts, r, y)
        return g - integral

    return F


def solve_symmetric_grid(pts, wts, rgrid, inner_tol):
    k = len(rgrid)
    b = np.zeros(k)
    max_p = float(np.max(np.abs(pts)))
    for i in range(1, k):
        F = _symmetric_F(pts, wts, rgrid, b, i)
        ceiling = min(b[i - 1] + 5.0 / math.sqrt(rgrid[i]), 690.0 / max_p)
        b[i] = _solve_step(F, b[i - 1], ceiling, inner_tol, f"symmetric step {i} (r={rgrid[i]:.6g})")
    return b


def residual_symmetric_nodes(pts, wts, rgrid, b):
    k = len(rgrid)
    res = np.zeros(k)
    for i in range(1, k):
        F = _symmetric_F(pts, wts, rgrid, b, i)
        res[i] = abs(F(b[i]))
    return res


def fixed_point_sweep(pts, wts, rgrid, b):
    """One application of the fixed-point operator: b + integral - g."""
    k = len(rgrid)
    out = b.copy()
    for i in range(1, k):
        F = _symmetric_F(pts, wts, rgrid, b, i)
        out[i] = b[i] - F(b[i])
    return out


# ---------------------------------------------------------------------------
# Asymmetric problem on the r-grid (mixture priors, q >= 0 or one-sided)
# ---------------------------------------------------------------------------


class _AsymStep:
    """One-sided tail kernel columns: E[h(u, S_u); S_u >= bu_j] and
    E[h(u, S_u); S_u <= bl_j] from start (r, y), vectorized in j."""

    def __init__(self, pts, wts, r, u, bu, bl):
        v = u - r
        self.inv = 1.0 / np.sqrt(v)
        pv = pts[:, None] * v[None, :]
        self.arg_up = (pv - bu[None, :]) * self.inv[None, :]
        self.arg_lo = (bl[None, :] - pv) * self.inv[None, :] if bl is not None else None
        self.pts = pts
        self.wts = wts
        self.r = r

    def _ecoef(self, y):
        return self.wts * self.pts * np.exp(self.pts * y - 0.5 * self.pts * self.pts * self.r)

    def upper_column(self, y: float) -> np.ndarray:
        ph = ndtr(self.arg_up + (y * self.inv)[None, :])
        with np.errstate(invalid="ignore"):
            term = np.where(ph == 0.0, 0.0, self._ecoef(y)[:, None] * ph)
        return term.sum(axis=0)

    def lower_column(self, y: float) -> np.ndarray:
        ph = ndtr(self.arg_lo - (y * self.inv)[None, :])
        with np.errstate(invalid="ignore"):
            term = np.where(ph == 0.0, 0.0, self._ecoef(y)[:, None] * ph)
        return term.sum(axis=0)


def solve_asymmetric_grid(pts, wts, rgrid, q, one_sided, inner_tol):
    k = len(rgrid)
    bu = np.zeros(k)
    bl = None if one_sided else np.zeros(k)
    max_p = float(np.max(np.abs(pts)))
    fac = 1.0 if one_sided else 1.0 + 2.0 * q
    for i in range(1, k):
        r = rgrid[i]
        coef = _trap_coefs(rgrid, i)
        step = _AsymStep(pts, wts, r, rgrid[:i], bu[:i], None if one_sided else bl[:i])
        one_minus_r = 1.0 - r

        def integral(y: float) -> float:
            col = fac * step.upper_column(y)
            if not one_sided:
                col = col - step.lower_column(y)
            return float(coef[:i] @ col)

        def F_up(y: float) -> float:
            g = one_minus_r * fac * _h_mix(pts, wts, r, y)
            return g - integral(y) - coef[i] * fac * _half_sum(pts, wts, r, y)

        ceiling = min(bu[i - 1] + 5.0 / math.sqrt(r), 690.0 / max_p)
        bu[i] = _solve_step(F_up, bu[i - 1], ceiling, inner_tol,
                            f"asymmetric upper step {i} (r={r:.6g})")
        if not one_sided:

            def F_lo(y: float) -> float:
                g = -one_minus_r * _h_mix(pts, wts, r, y)
                return g - integral(y) + coef[i] * _half_sum(pts, wts, r, y)

            ceiling_lo = min(-bl[i - 1] + 5.0 / math.sqrt(r), 690.0 / max_p)
            bl[i] = _solve_step(F_lo, -bl[i - 1], ceiling_lo, inner_tol,
                                f"asymmetric lower step {i} (r={r:.6g})", downward=True)
    return bu, bl


# ---------------------------------------------------------------------------
# Standardized problem on the s-grid (time-changed Brownian motion)
# ---------------------------------------------------------------------------


def _c_weights(sgrid: np.ndarray, i: int) -> np.ndarray:
    """Product-integration node weights for the integral of u^-2 * E(u) over
    [s_i, s_0], with E piecewise linear on the nodes.

    The explicit u^-2 weight is integrated exactly per interval; a plain
    trapezoid would carry a convexity bias that swamps the equation's
    structural slack at deep s.  Node 0 is the terminal time, node i the
    current (diagonal) one.
    """
    a = sgrid[1 : i + 1]
    b = sgrid[:i]
    d = b - a
    x = d / a
    # phi(x) = log(1+x)/x - 1/(1+x); series below the cancellation floor
    small = np.abs(x) < 1e-4
    xs = np.where(small, x, 0.5)
    series = xs * (0.5 + xs * (-2.0 / 3.0 + xs * 0.75))
    with np.errstate(divide="ignore", invalid="ignore"):
        direct = np.log1p(x) / x - 1.0 / (1.0 + x)
    phi_x = np.where(small, series, direct)
    w_b = phi_x / a
    w_a = d / (a * b) - w_b
    coef = np.zeros(i + 1)
    coef[:i] += w_b
    coef[1 : i + 1] += w_a
    return coef


class _CStep:
    """Gaussian tail kernels for the standardized equation, vectorized in j.

    Columns return the bare expectations; the u^-2 weight lives in the
    product-integration coefficients.
    """

    def __init__(self, s, u, cu, cl):
        v = u - s
        self.sq = np.sqrt(v)
        self.inv = 1.0 / self.sq
        self.cu = cu
        self.cl = cl

    def abs_column(self, y: float) -> np.ndarray:
        # E[|W_u| ; |W_u| >= cu_j] from W_s = y
        ap = (self.cu - y) * self.inv
        am = (-self.cu - y) * self.inv
        return self.sq * (_phi(ap) + _phi(am)) + y * (1.0 - ndtr(ap) - ndtr(am))

    def upper_column(self, y: float) -> np.ndarray:
        # E[W_u ; W_u >= cu_j]
        a = (self.cu - y) * self.inv
        return y * ndtr(-a) + self.sq * _phi(a)

    def lower_column(self, y: float) -> np.ndarray:
        # E[W_u ; W_u <= cl_j]
        a = (self.cl - y) * self.inv
        return y * ndtr(a) - self.sq * _phi(a)


def solve_c_grid(sgrid, q, one_sided, inner_tol):
    """Backward solve of the standardized boundary; q = 0 with
    one_sided=False uses the coupled two-boundary recursion as well, so the
    symmetric reduction is a genuine cross-check."""
    k = len(sgrid)
    cu = np.zeros(k)
    cl = None if one_sided else np.zeros(k)
    fac = 1.0 if one_sided else 1.0 + 2.0 * q
    for i in range(1, k):
        s = sgrid[i]
        coef = _c_weights(sgrid, i)
        step = _CStep(s, sgrid[:i], cu[:i], None if one_sided else cl[:i])
        tfac = 1.0 + 1.0 / s

        def integral(y: float) -> float:
            col = fac * step.upper_column(y)
            if not one_sided:
                col = col - step.lower_column(y)
            return float(coef[:i] @ col)

        def F_up(y: float) -> float:
            return tfac * fac * y - integral(y) - coef[i] * fac * 0.5 * y

        ceiling = cu[i - 1] + 64.0
        cu[i] = _solve_step(F_up, cu[i - 1], ceiling, inner_tol,
                            f"standardized upper step {i} (s={s:.6g})")
        if not one_sided:

            def F_lo(y: float) -> float:
                return -tfac * y - integral(y) + coef[i] * 0.5 * y

            cl[i] = _solve_step(F_lo, -cl[i - 1], -cl[i - 1] + 64.0, inner_tol,
                                f"standardized lower step {i} (s={s:.6g})", downward=True)
    return cu, cl


def solve_c_grid_symmetric(sgrid, inner_tol):
    """Single-equation symmetric solve with the |W| kernel (the direct form)."""
    k = len(sgrid)
    c = np.zeros(k)
    for i in range(1, k):
        s = sgrid[i]
        coef = _c_weights(sgrid, i)
        step = _CStep(s, sgrid[:i], c[:i], None)
        tfac = 1.0 + 1.0 / s

        def F(y: float) -> float:
            integral = float(coef[:i] @ step.abs_column(y))
            return tfac * y - integral - coef[i] * 0.5 * y

        c[i] = _solve_step(F, c[i - 1], c[i - 1] + 64.0, inner_tol,
                           f"standardized step {i} (s={s:.6g})")
    return c


def residual_c_nodes(sgrid, c):
    k = len(sgrid)
    res = np.zeros(k)
    for i in range(1, k):
        s = sgrid[i]
        coef = _c_weights(sgrid, i)
        step = _CStep(s, sgrid[:i], c[:i], None)
        integral = float(coef[:i] @ step.abs_column(c[i]))
        res[i] = abs((1.0 + 1.0 / s) * c[i] - integral - coef[i] * 0.5 * c[i])
    return res


# ---------------------------------------------------------------------------
# Binomial-tree value iteration
# ---------------------------------------------------------------------------


def _extract_slice(V, G, j0, rel_tol):
    """Smallest |y| indices (upper from center up, lower from center down)
    where V equals the reward within rel_tol relative.

    The outermost rows are excluded: their values are pinned to the reward
    by the lattice truncation, not by the recursion.
    """
    diff = V - G
    tol = rel_tol * np.abs(G)
    eq = diff <= tol
    up = eq[j0:-1]
    lo = eq[1 : j0 + 1][::-1]
    iu = int(np.argmax(up))
    il = int(np.argmax(lo))
    u_found = bool(up[iu])
    l_found = bool(lo[il])
    return iu, u_found, il, l_found


def _tree_core(times, tf, y, dy, slice_reward, one_sided_extract, rel_tol, keep_values):
    n = len(times) - 1
    ny = len(y)
    j0 = (ny - 1) // 2
    upper = np.empty(n + 1)
    lower = np.empty(n + 1)
    uflag = np.zeros(n + 1, dtype=bool)
    lflag = np.zeros(n + 1, dtype=bool)
    values = np.empty((n + 1, ny)) if keep_values else None

    G = slice_reward(0)
    V = G.copy()
    if keep_values:
        values[0] = V

    def record(i, V, G):
        iu, ufound, il, lfound = _extract_slice(V, G, j0, rel_tol)
        if ufound:
            upper[i] = y[j0 + iu]
        else:
            upper[i] = y[-1]
            uflag[i] = True
        if lfound:
            lower[i] = y[j0 - il]
        else:
            lower[i] = y[0]
            lflag[i] = True

    record(0, V, G)
    for i in range(1, n + 1):
        G = slice_reward(i)
        cont = np.empty(ny)
        cont[1:-1] = 0.5 * (V[2:] + V[:-2])
        # top rows sit in the stopping region once y_max clears the boundary
        cont[0] = G[0]
        cont[-1] = G[-1]
        V = np.maximum(G, cont)
        if keep_values:
            values[i] = V
        record(i, V, G)
    return upper, lower, uflag, lflag, values


def tree_mixture(pts, wts, E, q, times, tf, y, dy, one_sided, rel_tol, keep_values):
    """Value iteration for the discounted mixture reward tf(t) * psi(h(t, y)).

    E is the precomputed exp(p_a * y_j) table so both backends consume the
    same atom factors; per-slice coefficients use scalar libm exp.
    """
    natoms = len(pts)

    def slice_reward(i):
        t = times[i]
        h = np.zeros(len(y))
        for a in range(natoms):
            ka = wts[a] * pts[a] * math.exp(-0.5 * pts[a] * pts[a] * t)
            h += ka * E[a]
        if one_sided:
            psi = np.maximum(h, 0.0)
        else:
            psi = np.abs(h) + (2.0 * q) * np.maximum(h, 0.0)
        return tf[i] * psi

    return _tree_core(times, tf, y, dy, slice_reward, one_sided, rel_tol, keep_values)


def tree_abs(q, times, tf, y, dy, one_sided, rel_tol, keep_values):
    """Value iteration for the reward tf(t) * (|y| + 2q max(y, 0))."""
    ay = np.abs(y)
    yp = np.maximum(y, 0.0)

    def slice_reward(i):
        if one_sided:
            return tf[i] * yp
        return tf[i] * (ay + (2.0 * q) * yp)

    return _tree_core(times, tf, y, dy, slice_reward, one_sided, rel_tol, keep_values)


def tree_generic(reward, times, y, dy, rel_tol, keep_values):
    """Value iteration for an arbitrary vectorized reward callable."""

    def slice_reward(i):
        return np.asarray(reward(times[i], y), dtype=float)

    return _tree_core(times, None, y, dy, slice_reward, False, rel_tol, keep_values)


# ---------------------------------------------------------------------------
# Monte Carlo path kernels
# ---------------------------------------------------------------------------


def _path_generator(seed, path):
    return Generator(Philox(key=(int(seed) << 64) + int(path)))


def _h_mix_scalar(pts, wts, r, y):
    h = 0.0
    for a in range(len(pts)):
        h += wts[a] * pts[a] * math.exp(pts[a] * y - 0.5 * pts[a] * pts[a] * r)
    return h


def _h_normal_exact(m0, r0, r, y):
    tot = r0 + r
    m = (m0 * r0 + y) / tot
    scale = math.sqrt(r0) * math.exp(-0.5 * r0 * m0 * m0)
    return scale * m * math.exp(0.5 * m * m * tot) / math.sqrt(tot)


def _f_tilde_scalar(horizon_kind, omega, t):
    if horizon_kind == HORIZON_FIXED:
        rem = 1.0 - t
        return rem if rem > 0.0 else 0.0
    if horizon_kind == HORIZON_EXPONENTIAL:
        return math.exp(-t)
    return (1.0 + t / (omega - 1.0)) ** (1.0 - omega)


def mc_chunk(mode, prior_kind, pts, wts, cum, m0, r0, horizon_kind, omega, q,
             upper, lower, step, n_cap, seed, path_lo, path_hi):
    """Simulate paths [path_lo, path_hi) and return (sum, sum of squares).

    Stream protocol per path: optional prior draw (uniform for mixtures,
    standard normal for the normal family), optional horizon uniform, then
    one standard normal per monitoring step.  Stopping happens at the first
    grid time i*step with S >= upper[i] or S <= lower[i].
    """
    sqrt_step = math.sqrt(step)
    total = 0.0
    total_sq = 0.0
    for path in range(path_lo, path_hi):
        g = _path_generator(seed, path)
        delta = 0.0
        horizon = 1.0
        n_steps = n_cap
        if mode == MC_POLICY:
            if prior_kind == PRIOR_MIXTURE:
                u = g.random()
                a = 0
                while u >= cum[a]:
                    a += 1
                delta = pts[a]
            else:
                delta = m0 + g.standard_normal() / math.sqrt(r0)
            if horizon_kind == HORIZON_EXPONENTIAL:
                horizon = -math.log(1.0 - g.random())
                n_steps = min(int(horizon / step), n_cap)
            elif horizon_kind == HORIZON_LOMAX:
                u = g.random()
                horizon = (omega - 1.0) * ((1.0 - u) ** (-1.0 / omega) - 1.0)
                n_steps = min(int(horizon / step), n_cap)
        drift = delta * step
        pos = 0.0
        i = 0
        stopped = False
        rho = n_steps * step
        s_stop = pos
        if 0.0 >= upper[0] or 0.0 <= lower[0]:
            rho = 0.0
            stopped = True
            n_steps = 0
        while i < n_steps:
            m = min(STEP_CHUNK, n_steps - i)
            z = g.standard_normal(m)
            buf = np.empty(m + 1)
            buf[0] = pos
            buf[1:] = drift + sqrt_step * z
            s_path = np.cumsum(buf)[1:]
            seg = slice(i + 1, i + 1 + m)
            crossed = (s_path >= upper[seg]) | (s_path <= lower[seg])
            idx = int(np.argmax(crossed))
            if crossed[idx]:
                rho = (i + idx + 1) * step
                s_stop = float(s_path[idx])
                stopped = True
                break
            pos = float(s_path[-1])
            i += m

        if mode == MC_STOP_TIME:
            payoff = rho
        elif mode == MC_POLICY:
            if stopped:
                if prior_kind == PRIOR_MIXTURE:
                    h = _h_mix_scalar(pts, wts, rho, s_stop)
                else:
                    h = m0 * r0 + s_stop
                decision = 1.0 if h >= 0.0 else -1.0
                rem = horizon - rho
                if rem < 0.0:
                    rem = 0.0
                payoff = delta * ((q + 1.0) * rem * decision - q * rho)
            else:
                payoff = delta * (-q * horizon)
        else:  # MC_TRANSFORMED
            if stopped:
                if prior_kind == PRIOR_MIXTURE:
                    h = _h_mix_scalar(pts, wts, rho, s_stop)
                else:
                    h = _h_normal_exact(m0, r0, rho, s_stop)
                hplus = h if h > 0.0 else 0.0
                psi = abs(h) + 2.0 * q * hplus
                payoff = _f_tilde_scalar(horizon_kind, omega, rho) * psi
            else:
                payoff = 0.0

        total += payoff
        total_sq += payoff * payoff
    return total, total_sq


def ou_chunk(threshold, beta, dt, n_cap, seed, path_lo, path_hi):
    """Discounted threshold-rule value for the outward-drifting diffusion
    dX = X dt + sqrt(2) dB started at 0; payoff exp(-beta*t)|X_t| at the
    first |X| >= threshold, zero if the cap is reached first.

    Paths are advanced in lockstep across the chunk; per-path streams make
    the result identical to the compiled per-path loop.
    """
    npaths = path_hi - path_lo
    gens = [_path_generator(seed, p) for p in range(path_lo, path_hi)]
    pos = np.zeros(npaths)
    payoff = np.zeros(npaths)
    alive = np.ones(npaths, dtype=bool)
    sq2dt = math.sqrt(2.0 * dt)
    i = 0
    while i < n_cap and alive.any():
        m = min(STEP_CHUNK, n_cap - i)
        z = np.empty((npaths, m))
        for p in range(npaths):
            if alive[p]:
                z[p] = gens[p].standard_normal(m)
        for k in range(m):
            upd = (pos + pos * dt) + sq2dt * z[:, k]
            pos = np.where(alive, upd, pos)
            hit = alive & (np.abs(pos) >= threshold)
            if hit.any():
                t = (i + k + 1) * dt
                for p in np.nonzero(hit)[0]:
                    payoff[p] = math.exp(-beta * t) * abs(float(pos[p]))
                alive &= ~hit
        i += m
    total = 0.0
    total_sq = 0.0
    for p in range(npaths):
        v = float(payoff[p])
        total += v
        total_sq += v * v
    return total, total_sq
