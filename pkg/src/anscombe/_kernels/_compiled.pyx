# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled mirror of the fallback kernels.

Semantics match _fallback operation for operation; the Monte Carlo and
value-iteration kernels reproduce it bit for bit (same Philox substreams,
same arithmetic order, scalar libm calls), while the boundary solvers may
differ at the last ulp because the normal CDF here is libm erfc rather
than scipy's.
"""

import numpy as np

from cpython.pycapsule cimport PyCapsule_GetPointer
from libc.math cimport exp, fabs, log, log1p, pow, sqrt, erfc, INFINITY
from numpy.random cimport bitgen_t
from numpy.random.c_distributions cimport (
    random_standard_normal,
    random_standard_uniform,
)

from numpy.random import Philox

from ..errors import SolverError

cdef enum:
    C_MC_POLICY = 0
    C_MC_TRANSFORMED = 1
    C_MC_STOP_TIME = 2
    C_PRIOR_MIXTURE = 0
    C_PRIOR_NORMAL = 1
    C_HORIZON_FIXED = 0
    C_HORIZON_EXPONENTIAL = 1
    C_HORIZON_LOMAX = 2

PATH_CHUNK = 4096
STEP_CHUNK = 8192

MC_POLICY = C_MC_POLICY
MC_TRANSFORMED = C_MC_TRANSFORMED
MC_STOP_TIME = C_MC_STOP_TIME

PRIOR_MIXTURE = C_PRIOR_MIXTURE
PRIOR_NORMAL = C_PRIOR_NORMAL

HORIZON_FIXED = C_HORIZON_FIXED
HORIZON_EXPONENTIAL = C_HORIZON_EXPONENTIAL
HORIZON_LOMAX = C_HORIZON_LOMAX

cdef double _INV_SQRT_2PI = 0.3989422804014326779399460599343818684758586311649346576659258297
cdef double _SQRT1_2 = 0.7071067811865475244008443621048490392848359376884740365883398689


cdef inline double _ndtr(double x) noexcept nogil:
    return 0.5 * erfc(-x * _SQRT1_2)


cdef inline double _pdf(double x) noexcept nogil:
    return _INV_SQRT_2PI * exp(-0.5 * x * x)


# ---------------------------------------------------------------------------
# Backward-step equations
# ---------------------------------------------------------------------------

cdef enum:
    MODE_SYM = 0
    MODE_ASYM_UP = 1
    MODE_ASYM_LO = 2
    MODE_C_SYM = 3
    MODE_C_UP = 4
    MODE_C_LO = 5


cdef struct FCtx:
    int mode
    int i
    int natoms
    int one_sided
    double t            # current node time (r or s)
    double fac          # 1 + 2q, or 1 in the one-sided limit
    const double *pts
    const double *wts
    const double *grid
    const double *bu
    const double *bl
    const double *coef


cdef double _eval_F(FCtx *c, double y) noexcept nogil:
    cdef int j, a
    cdef double t = c.t
    cdef double h, v, sq, inv, kj, ut, lt, col, total, g
    cdef double p, w, argb, up, dn, pv, ap, am, al, ec
    cdef double tfac

    if c.mode <= MODE_ASYM_LO:
        h = 0.0
        for a in range(c.natoms):
            p = c.pts[a]
            h += c.wts[a] * p * exp(p * y - 0.5 * p * p * t)
        total = 0.0
        if c.mode == MODE_SYM:
            for j in range(c.i):
                v = c.grid[j] - t
                sq = sqrt(v)
                inv = 1.0 / sq
                kj = 0.0
                for a in range(c.natoms):
                    p = c.pts[a]
                    w = c.wts[a]
                    argb = (p * v - c.bu[j]) * inv
                    up = _ndtr(argb + y * inv)
                    dn = _ndtr(argb - y * inv)
                    if up != 0.0:
                        kj += w * p * exp(p * y - 0.5 * p * p * t) * up
                    if dn != 0.0:
                        kj += w * p * exp(-p * y - 0.5 * p * p * t) * dn
                total += c.coef[j] * kj
            total += c.coef[c.i] * 0.5 * h
            return (1.0 - t) * h - total
        for j in range(c.i):
            v = c.grid[j] - t
            sq = sqrt(v)
            inv = 1.0 / sq
            ut = 0.0
            lt = 0.0
            for a in range(c.natoms):
                p = c.pts[a]
                w = c.wts[a]
                pv = p * v
                ec = w * p * exp(p * y - 0.5 * p * p * t)
                up = _ndtr((pv - c.bu[j] + y) * inv)
                if up != 0.0:
                    ut += ec * up
                if not c.one_sided:
                    dn = _ndtr((c.bl[j] - y - pv) * inv)
                    if dn != 0.0:
                        lt += ec * dn
            col = c.fac * ut - lt
            total += c.coef[j] * col
        if c.mode == MODE_ASYM_UP:
            return (1.0 - t) * c.fac * h - total - c.coef[c.i] * c.fac * 0.5 * h
        return -(1.0 - t) * h - total + c.coef[c.i] * 0.5 * h

    tfac = 1.0 + 1.0 / t
    total = 0.0
    if c.mode == MODE_C_SYM:
        for j in range(c.i):
            sq = sqrt(c.grid[j] - t)
            inv = 1.0 / sq
            ap = (c.bu[j] - y) * inv
            am = (-c.bu[j] - y) * inv
            total += c.coef[j] * (
                sq * (_pdf(ap) + _pdf(am)) + y * (1.0 - _ndtr(ap) - _ndtr(am))
            )
        return tfac * y - total - c.coef[c.i] * 0.5 * y
    for j in range(c.i):
        sq = sqrt(c.grid[j] - t)
        inv = 1.0 / sq
        ap = (c.bu[j] - y) * inv
        col = c.fac * (y * _ndtr(-ap) + sq * _pdf(ap))
        if not c.one_sided:
            al = (c.bl[j] - y) * inv
            col -= y * _ndtr(al) - sq * _pdf(al)
        total += c.coef[j] * col
    if c.mode == MODE_C_UP:
        return tfac * c.fac * y - total - c.coef[c.i] * c.fac * 0.5 * y
    return -tfac * y - total + c.coef[c.i] * 0.5 * y


cdef double _illinois(FCtx *ctx, double sign, double lo, double hi,
                      double flo, double fhi, double tol, int max_iter,
                      str label):
    """Bracketed root search mirroring numerics.find_root."""
    cdef int side = 0
    cdef int it
    cdef double x, fx, margin
    for it in range(max_iter):
        if hi - lo <= tol:
            return 0.5 * (lo + hi)
        if it % 4 == 3:
            x = 0.5 * (lo + hi)
        else:
            x = (lo * fhi - hi * flo) / (fhi - flo)
            margin = 1e-3 * (hi - lo)
            if not (lo + margin <= x <= hi - margin):
                x = 0.5 * (lo + hi)
        fx = _eval_F(ctx, sign * x)
        if fx == 0.0:
            return x
        if (fx < 0.0) == (flo < 0.0):
            lo = x
            flo = fx
            if side == -1:
                fhi *= 0.5
            side = -1
        else:
            hi = x
            fhi = fx
            if side == 1:
                flo *= 0.5
            side = 1
    raise SolverError(f"{label}: root search exceeded {max_iter} iterations")


cdef double _solve_step_c(FCtx *ctx, double anchor, double ceiling,
                          double inner_tol, str label, bint downward):
    cdef double sign = -1.0 if downward else 1.0
    cdef double f0 = _eval_F(ctx, 0.0)
    cdef double inc, cand, fc, root
    if f0 == 0.0:
        return 0.0
    if f0 > 0.0:
        raise SolverError(f"{label}: equation has no sign change from 0 (F(0)={f0})")
    inc = 0.5
    while True:
        cand = anchor + inc
        if cand > ceiling:
            cand = ceiling
        fc = _eval_F(ctx, sign * cand)
        if fc > 0.0:
            break
        if fc == 0.0:
            return sign * cand
        if cand >= ceiling:
            raise SolverError(
                f"{label}: no sign change up to bracket ceiling {ceiling:.6g}"
            )
        inc *= 2.0
    root = _illinois(ctx, sign, 0.0, cand, f0, fc, inner_tol, 400, label)
    return sign * root


cdef void _trap_coefs_c(const double *tgrid, int i, double *coef) noexcept nogil:
    cdef int j
    cdef double d_prev, d_next
    d_prev = tgrid[0] - tgrid[1]
    coef[0] = 0.5 * d_prev
    for j in range(1, i):
        d_next = tgrid[j] - tgrid[j + 1]
        coef[j] = 0.5 * (d_prev + d_next)
        d_prev = d_next
    coef[i] = 0.5 * d_prev


cdef void _c_weights_c(const double *sgrid, int i, double *coef) noexcept nogil:
    """Product-integration weights for u^-2 against a piecewise-linear
    kernel; mirrors _fallback._c_weights including the series branch."""
    cdef int j
    cdef double a, b, d, x, phi_x, w_b, w_a
    for j in range(i + 1):
        coef[j] = 0.0
    for j in range(i):
        b = sgrid[j]
        a = sgrid[j + 1]
        d = b - a
        x = d / a
        if fabs(x) < 1e-4:
            phi_x = x * (0.5 + x * (-2.0 / 3.0 + x * 0.75))
        else:
            phi_x = log1p(x) / x - 1.0 / (1.0 + x)
        w_b = phi_x / a
        w_a = d / (a * b) - w_b
        coef[j] += w_b
        coef[j + 1] += w_a


def solve_symmetric_grid(double[::1] pts, double[::1] wts, double[::1] rgrid,
                         double inner_tol):
    cdef int k = rgrid.shape[0]
    cdef int i
    b_arr = np.zeros(k)
    coef_arr = np.empty(k)
    cdef double[::1] b = b_arr
    cdef double[::1] coef = coef_arr
    cdef double max_p = 0.0, ceiling
    cdef FCtx ctx
    for i in range(pts.shape[0]):
        if fabs(pts[i]) > max_p:
            max_p = fabs(pts[i])
    ctx.mode = MODE_SYM
    ctx.natoms = pts.shape[0]
    ctx.one_sided = 0
    ctx.fac = 1.0
    ctx.pts = &pts[0]
    ctx.wts = &wts[0]
    ctx.grid = &rgrid[0]
    ctx.bl = NULL
    for i in range(1, k):
        _trap_coefs_c(&rgrid[0], i, &coef[0])
        ctx.i = i
        ctx.t = rgrid[i]
        ctx.bu = &b[0]
        ctx.coef = &coef[0]
        ceiling = b[i - 1] + 5.0 / sqrt(rgrid[i])
        if ceiling > 690.0 / max_p:
            ceiling = 690.0 / max_p
        b[i] = _solve_step_c(&ctx, b[i - 1], ceiling, inner_tol,
                             f"symmetric step {i} (r={rgrid[i]:.6g})", False)
    return b_arr


def residual_symmetric_nodes(double[::1] pts, double[::1] wts,
                             double[::1] rgrid, double[::1] b):
    cdef int k = rgrid.shape[0]
    cdef int i
    res_arr = np.zeros(k)
    coef_arr = np.empty(k)
    cdef double[::1] res = res_arr
    cdef double[::1] coef = coef_arr
    cdef FCtx ctx
    ctx.mode = MODE_SYM
    ctx.natoms = pts.shape[0]
    ctx.one_sided = 0
    ctx.fac = 1.0
    ctx.pts = &pts[0]
    ctx.wts = &wts[0]
    ctx.grid = &rgrid[0]
    ctx.bl = NULL
    for i in range(1, k):
        _trap_coefs_c(&rgrid[0], i, &coef[0])
        ctx.i = i
        ctx.t = rgrid[i]
        ctx.bu = &b[0]
        ctx.coef = &coef[0]
        res[i] = fabs(_eval_F(&ctx, b[i]))
    return res_arr


def fixed_point_sweep(double[::1] pts, double[::1] wts, double[::1] rgrid,
                      double[::1] b):
    cdef int k = rgrid.shape[0]
    cdef int i
    out_arr = np.empty(k)
    coef_arr = np.empty(k)
    cdef double[::1] out = out_arr
    cdef double[::1] coef = coef_arr
    cdef FCtx ctx
    out[0] = b[0]
    ctx.mode = MODE_SYM
    ctx.natoms = pts.shape[0]
    ctx.one_sided = 0
    ctx.fac = 1.0
    ctx.pts = &pts[0]
    ctx.wts = &wts[0]
    ctx.grid = &rgrid[0]
    ctx.bl = NULL
    for i in range(1, k):
        _trap_coefs_c(&rgrid[0], i, &coef[0])
        ctx.i = i
        ctx.t = rgrid[i]
        ctx.bu = &b[0]
        ctx.coef = &coef[0]
        out[i] = b[i] - _eval_F(&ctx, b[i])
    return out_arr


def solve_asymmetric_grid(double[::1] pts, double[::1] wts, double[::1] rgrid,
                          double q, bint one_sided, double inner_tol):
    cdef int k = rgrid.shape[0]
    cdef int i
    bu_arr = np.zeros(k)
    bl_arr = None if one_sided else np.zeros(k)
    coef_arr = np.empty(k)
    cdef double[::1] bu = bu_arr
    cdef double[::1] bl
    cdef double[::1] coef = coef_arr
    cdef double max_p = 0.0, ceiling, r
    cdef FCtx ctx
    for i in range(pts.shape[0]):
        if fabs(pts[i]) > max_p:
            max_p = fabs(pts[i])
    ctx.natoms = pts.shape[0]
    ctx.one_sided = 1 if one_sided else 0
    ctx.fac = 1.0 if one_sided else 1.0 + 2.0 * q
    ctx.pts = &pts[0]
    ctx.wts = &wts[0]
    ctx.grid = &rgrid[0]
    if not one_sided:
        bl = bl_arr
    for i in range(1, k):
        r = rgrid[i]
        _trap_coefs_c(&rgrid[0], i, &coef[0])
        ctx.i = i
        ctx.t = r
        ctx.bu = &bu[0]
        ctx.bl = NULL if one_sided else &bl[0]
        ctx.coef = &coef[0]
        ctx.mode = MODE_ASYM_UP
        ceiling = bu[i - 1] + 5.0 / sqrt(r)
        if ceiling > 690.0 / max_p:
            ceiling = 690.0 / max_p
        bu[i] = _solve_step_c(&ctx, bu[i - 1], ceiling, inner_tol,
                              f"asymmetric upper step {i} (r={r:.6g})", False)
        if not one_sided:
            ctx.mode = MODE_ASYM_LO
            ceiling = -bl[i - 1] + 5.0 / sqrt(r)
            if ceiling > 690.0 / max_p:
                ceiling = 690.0 / max_p
            bl[i] = _solve_step_c(&ctx, -bl[i - 1], ceiling, inner_tol,
                                  f"asymmetric lower step {i} (r={r:.6g})", True)
    return bu_arr, bl_arr


def solve_c_grid(double[::1] sgrid, double q, bint one_sided, double inner_tol):
    cdef int k = sgrid.shape[0]
    cdef int i
    cu_arr = np.zeros(k)
    cl_arr = None if one_sided else np.zeros(k)
    coef_arr = np.empty(k)
    cdef double[::1] cu = cu_arr
    cdef double[::1] cl
    cdef double[::1] coef = coef_arr
    cdef double s
    cdef FCtx ctx
    ctx.natoms = 0
    ctx.one_sided = 1 if one_sided else 0
    ctx.fac = 1.0 if one_sided else 1.0 + 2.0 * q
    ctx.pts = NULL
    ctx.wts = NULL
    ctx.grid = &sgrid[0]
    if not one_sided:
        cl = cl_arr
    for i in range(1, k):
        s = sgrid[i]
        _c_weights_c(&sgrid[0], i, &coef[0])
        ctx.i = i
        ctx.t = s
        ctx.bu = &cu[0]
        ctx.bl = NULL if one_sided else &cl[0]
        ctx.coef = &coef[0]
        ctx.mode = MODE_C_UP
        cu[i] = _solve_step_c(&ctx, cu[i - 1], cu[i - 1] + 64.0, inner_tol,
                              f"standardized upper step {i} (s={s:.6g})", False)
        if not one_sided:
            ctx.mode = MODE_C_LO
            cl[i] = _solve_step_c(&ctx, -cl[i - 1], -cl[i - 1] + 64.0, inner_tol,
                                  f"standardized lower step {i} (s={s:.6g})", True)
    return cu_arr, cl_arr


def solve_c_grid_symmetric(double[::1] sgrid, double inner_tol):
    cdef int k = sgrid.shape[0]
    cdef int i
    c_arr = np.zeros(k)
    coef_arr = np.empty(k)
    cdef double[::1] c = c_arr
    cdef double[::1] coef = coef_arr
    cdef FCtx ctx
    ctx.mode = MODE_C_SYM
    ctx.natoms = 0
    ctx.one_sided = 0
    ctx.fac = 1.0
    ctx.pts = NULL
    ctx.wts = NULL
    ctx.grid = &sgrid[0]
    ctx.bl = NULL
    for i in range(1, k):
        _c_weights_c(&sgrid[0], i, &coef[0])
        ctx.i = i
        ctx.t = sgrid[i]
        ctx.bu = &c[0]
        ctx.coef = &coef[0]
        c[i] = _solve_step_c(&ctx, c[i - 1], c[i - 1] + 64.0, inner_tol,
                             f"standardized step {i} (s={sgrid[i]:.6g})", False)
    return c_arr


def residual_c_nodes(double[::1] sgrid, double[::1] c):
    cdef int k = sgrid.shape[0]
    cdef int i
    res_arr = np.zeros(k)
    coef_arr = np.empty(k)
    cdef double[::1] res = res_arr
    cdef double[::1] coef = coef_arr
    cdef FCtx ctx
    ctx.mode = MODE_C_SYM
    ctx.natoms = 0
    ctx.one_sided = 0
    ctx.fac = 1.0
    ctx.pts = NULL
    ctx.wts = NULL
    ctx.grid = &sgrid[0]
    ctx.bl = NULL
    for i in range(1, k):
        _c_weights_c(&sgrid[0], i, &coef[0])
        ctx.i = i
        ctx.t = sgrid[i]
        ctx.bu = &c[0]
        ctx.coef = &coef[0]
        res[i] = fabs(_eval_F(&ctx, c[i]))
    return res_arr


# ---------------------------------------------------------------------------
# Binomial-tree value iteration
# ---------------------------------------------------------------------------


cdef void _extract_c(const double *V, const double *G, const double *y,
                     int ny, int j0, double rel_tol, long i,
                     double *upper, double *lower,
                     char *uflag, char *lflag) noexcept nogil:
    # outermost rows excluded: pinned to the reward by truncation
    cdef int j
    cdef bint found = False
    for j in range(j0, ny - 1):
        if V[j] - G[j] <= rel_tol * fabs(G[j]):
            upper[i] = y[j]
            found = True
            break
    if not found:
        upper[i] = y[ny - 1]
        uflag[i] = 1
    found = False
    for j in range(j0, 0, -1):
        if V[j] - G[j] <= rel_tol * fabs(G[j]):
            lower[i] = y[j]
            found = True
            break
    if not found:
        lower[i] = y[0]
        lflag[i] = 1


def tree_mixture(double[::1] pts, double[::1] wts, double[:, ::1] E, double q,
                 double[::1] times, double[::1] tf, double[::1] y, double dy,
                 bint one_sided, double rel_tol, bint keep_values):
    cdef long n = times.shape[0] - 1
    cdef int ny = y.shape[0]
    cdef int j0 = (ny - 1) // 2
    cdef int natoms = pts.shape[0]
    upper_arr = np.empty(n + 1)
    lower_arr = np.empty(n + 1)
    uflag_arr = np.zeros(n + 1, dtype=bool)
    lflag_arr = np.zeros(n + 1, dtype=bool)
    values_arr = np.empty((n + 1, ny)) if keep_values else None
    V_arr = np.empty(ny)
    W_arr = np.empty(ny)
    G_arr = np.empty(ny)
    cdef double[::1] upper = upper_arr
    cdef double[::1] lower = lower_arr
    cdef char[::1] uflag = uflag_arr.view(np.int8)
    cdef char[::1] lflag = lflag_arr.view(np.int8)
    cdef double[:, ::1] values
    cdef double[::1] V = V_arr
    cdef double[::1] W = W_arr
    cdef double[::1] G = G_arr
    cdef long i
    cdef int j, a
    cdef double t, ka, h, psi, cont
    cdef double[::1] tmp

    if keep_values:
        values = values_arr

    with nogil:
        for i in range(n + 1):
            t = times[i]
            for j in range(ny):
                G[j] = 0.0
            for a in range(natoms):
                ka = wts[a] * pts[a] * exp(-0.5 * pts[a] * pts[a] * t)
                for j in range(ny):
                    G[j] += ka * E[a, j]
            for j in range(ny):
                h = G[j]
                if one_sided:
                    psi = h if h > 0.0 else 0.0
                else:
                    psi = fabs(h) + (2.0 * q) * (h if h > 0.0 else 0.0)
                G[j] = tf[i] * psi
            if i == 0:
                for j in range(ny):
                    V[j] = G[j]
            else:
                for j in range(1, ny - 1):
                    cont = 0.5 * (V[j + 1] + V[j - 1])
                    W[j] = G[j] if G[j] > cont else cont
                W[0] = G[0]
                W[ny - 1] = G[ny - 1]
                tmp = V
                V = W
                W = tmp
            if keep_values:
                for j in range(ny):
                    values[i, j] = V[j]
            _extract_c(&V[0], &G[0], &y[0], ny, j0, rel_tol, i,
                       &upper[0], &lower[0], &uflag[0], &lflag[0])
    return upper_arr, lower_arr, uflag_arr, lflag_arr, values_arr


def tree_abs(double q, double[::1] times, double[::1] tf, double[::1] y,
             double dy, bint one_sided, double rel_tol, bint keep_values):
    cdef long n = times.shape[0] - 1
    cdef int ny = y.shape[0]
    cdef int j0 = (ny - 1) // 2
    upper_arr = np.empty(n + 1)
    lower_arr = np.empty(n + 1)
    uflag_arr = np.zeros(n + 1, dtype=bool)
    lflag_arr = np.zeros(n + 1, dtype=bool)
    values_arr = np.empty((n + 1, ny)) if keep_values else None
    V_arr = np.empty(ny)
    W_arr = np.empty(ny)
    G_arr = np.empty(ny)
    cdef double[::1] upper = upper_arr
    cdef double[::1] lower = lower_arr
    cdef char[::1] uflag = uflag_arr.view(np.int8)
    cdef char[::1] lflag = lflag_arr.view(np.int8)
    cdef double[:, ::1] values
    cdef double[::1] V = V_arr
    cdef double[::1] W = W_arr
    cdef double[::1] G = G_arr
    cdef long i
    cdef int j
    cdef double yp, cont
    cdef double[::1] tmp

    if keep_values:
        values = values_arr

    with nogil:
        for i in range(n + 1):
            for j in range(ny):
                yp = y[j] if y[j] > 0.0 else 0.0
                if one_sided:
                    G[j] = tf[i] * yp
                else:
                    G[j] = tf[i] * (fabs(y[j]) + (2.0 * q) * yp)
            if i == 0:
                for j in range(ny):
                    V[j] = G[j]
            else:
                for j in range(1, ny - 1):
                    cont = 0.5 * (V[j + 1] + V[j - 1])
                    W[j] = G[j] if G[j] > cont else cont
                W[0] = G[0]
                W[ny - 1] = G[ny - 1]
                tmp = V
                V = W
                W = tmp
            if keep_values:
                for j in range(ny):
                    values[i, j] = V[j]
            _extract_c(&V[0], &G[0], &y[0], ny, j0, rel_tol, i,
                       &upper[0], &lower[0], &uflag[0], &lflag[0])
    return upper_arr, lower_arr, uflag_arr, lflag_arr, values_arr


# ---------------------------------------------------------------------------
# Monte Carlo path kernels
# ---------------------------------------------------------------------------


cdef inline double _h_mix_c(const double *pts, const double *wts, int natoms,
                            double r, double y) noexcept nogil:
    cdef double h = 0.0
    cdef int a
    for a in range(natoms):
        h += wts[a] * pts[a] * exp(pts[a] * y - 0.5 * pts[a] * pts[a] * r)
    return h


cdef inline double _h_normal_exact_c(double m0, double r0, double r,
                                     double y) noexcept nogil:
    cdef double tot = r0 + r
    cdef double m = (m0 * r0 + y) / tot
    cdef double scale = sqrt(r0) * exp(-0.5 * r0 * m0 * m0)
    return scale * m * exp(0.5 * m * m * tot) / sqrt(tot)


cdef inline double _f_tilde_c(int horizon_kind, double omega, double t) noexcept nogil:
    cdef double rem
    if horizon_kind == C_HORIZON_FIXED:
        rem = 1.0 - t
        return rem if rem > 0.0 else 0.0
    if horizon_kind == C_HORIZON_EXPONENTIAL:
        return exp(-t)
    return pow(1.0 + t / (omega - 1.0), 1.0 - omega)


def mc_chunk(int mode, int prior_kind, double[::1] pts, double[::1] wts,
             double[::1] cum, double m0, double r0, int horizon_kind,
             double omega, double q, double[::1] upper, double[::1] lower,
             double step, long n_cap, object seed, long path_lo, long path_hi):
    """Bit-compatible mirror of the fallback Monte Carlo chunk."""
    cdef double sqrt_step = sqrt(step)
    cdef double total = 0.0
    cdef double total_sq = 0.0
    cdef long path, i, n_steps
    cdef int a, natoms = pts.shape[0]
    cdef double delta, horizon, drift, pos, rho, s_stop, u, z
    cdef double h, decision, rem, payoff, hplus, psi
    cdef bint stopped
    cdef bitgen_t *bg
    cdef object bg_obj, capsule
    seed_int = int(seed)
    for path in range(path_lo, path_hi):
        bg_obj = Philox(key=(seed_int << 64) + path)
        capsule = bg_obj.capsule
        bg = <bitgen_t *> PyCapsule_GetPointer(capsule, "BitGenerator")
        delta = 0.0
        horizon = 1.0
        n_steps = n_cap
        if mode == C_MC_POLICY:
            if prior_kind == C_PRIOR_MIXTURE:
                u = random_standard_uniform(bg)
                a = 0
                while u >= cum[a]:
                    a += 1
                delta = pts[a]
            else:
                delta = m0 + random_standard_normal(bg) / sqrt(r0)
            if horizon_kind == C_HORIZON_EXPONENTIAL:
                horizon = -log(1.0 - random_standard_uniform(bg))
                n_steps = <long> (horizon / step)
                if n_steps > n_cap:
                    n_steps = n_cap
            elif horizon_kind == C_HORIZON_LOMAX:
                u = random_standard_uniform(bg)
                horizon = (omega - 1.0) * (pow(1.0 - u, -1.0 / omega) - 1.0)
                n_steps = <long> (horizon / step)
                if n_steps > n_cap:
                    n_steps = n_cap
        drift = delta * step
        pos = 0.0
        stopped = False
        rho = n_steps * step
        s_stop = pos
        if 0.0 >= upper[0] or 0.0 <= lower[0]:
            rho = 0.0
            stopped = True
            n_steps = 0
        with nogil:
            for i in range(n_steps):
                z = random_standard_normal(bg)
                pos = pos + (drift + sqrt_step * z)
                if pos >= upper[i + 1] or pos <= lower[i + 1]:
                    rho = (i + 1) * step
                    s_stop = pos
                    stopped = True
                    break

        if mode == C_MC_STOP_TIME:
            payoff = rho
        elif mode == C_MC_POLICY:
            if stopped:
                if prior_kind == C_PRIOR_MIXTURE:
                    h = _h_mix_c(&pts[0], &wts[0], natoms, rho, s_stop)
                else:
                    h = m0 * r0 + s_stop
                decision = 1.0 if h >= 0.0 else -1.0
                rem = horizon - rho
                if rem < 0.0:
                    rem = 0.0
                payoff = delta * ((q + 1.0) * rem * decision - q * rho)
            else:
                payoff = delta * (-q * horizon)
        else:
            if stopped:
                if prior_kind == C_PRIOR_MIXTURE:
                    h = _h_mix_c(&pts[0], &wts[0], natoms, rho, s_stop)
                else:
                    h = _h_normal_exact_c(m0, r0, rho, s_stop)
                hplus = h if h > 0.0 else 0.0
                psi = fabs(h) + 2.0 * q * hplus
                payoff = _f_tilde_c(horizon_kind, omega, rho) * psi
            else:
                payoff = 0.0

        total += payoff
        total_sq += payoff * payoff
    return total, total_sq


def ou_chunk(double threshold, double beta, double dt, long n_cap, object seed,
             long path_lo, long path_hi):
    cdef double sq2dt = sqrt(2.0 * dt)
    cdef double total = 0.0
    cdef double total_sq = 0.0
    cdef long path, i
    cdef double pos, z, payoff
    cdef bitgen_t *bg
    cdef object bg_obj, capsule
    seed_int = int(seed)
    for path in range(path_lo, path_hi):
        bg_obj = Philox(key=(seed_int << 64) + path)
        capsule = bg_obj.capsule
        bg = <bitgen_t *> PyCapsule_GetPointer(capsule, "BitGenerator")
        pos = 0.0
        payoff = 0.0
        with nogil:
            for i in range(n_cap):
                z = random_standard_normal(bg)
                pos = (pos + pos * dt) + sq2dt * z
                if fabs(pos) >= threshold:
                    payoff = exp(-beta * ((i + 1) * dt)) * fabs(pos)
                    break
        total += payoff
        total_sq += payoff * payoff
    return total, total_sq
