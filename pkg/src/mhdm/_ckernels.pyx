# cython: language_level=3
"""Compiled twins of the kernels in ``_pykernels``.

Signatures and return conventions match the pure-Python module exactly.
Dense products and triangular solves go through SciPy's Cython BLAS.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log, log1p, sqrt, fabs, pow, copysign, INFINITY, M_E
from scipy.linalg.cython_blas cimport dgemv, dtrsv

cnp.import_array()

NAME = "cython"

cdef double _INV_E = exp(-1.0)
cdef int _HALLEY_MAX_ITER = 64
cdef int _NEWTON_MAX_ITER = 100


# ---------------------------------------------------------------- helpers


cdef inline void _symv(const double[:, ::1] A, const double[::1] x, double[::1] out,
                       Py_ssize_t n) noexcept nogil:
    # out = A x for a symmetric C-contiguous A (row/column order coincide)
    cdef int nn = <int>n, inc = 1
    cdef double one = 1.0, zero = 0.0
    cdef char trans = b'N'
    if n == 0:
        return
    dgemv(&trans, &nn, &nn, &one, <double*>&A[0, 0], &nn, <double*>&x[0], &inc,
          &zero, &out[0], &inc)


cdef double _lambertw0_scalar(double x) noexcept nogil:
    cdef double p, w, l1, l2, ew, f, wp1, denom, dw
    cdef int k
    if x == 0.0:
        return 0.0
    if x <= -_INV_E:
        return -1.0
    if x < -0.32:
        p = sqrt(2.0 * (M_E * x + 1.0))
        w = -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p * p * p
    elif x <= M_E:
        w = log1p(x)
    else:
        l1 = log(x)
        l2 = log(l1)
        w = l1 - l2 + l2 / l1
    for k in range(_HALLEY_MAX_ITER):
        ew = exp(w)
        f = w * ew - x
        wp1 = w + 1.0
        if wp1 == 0.0:
            break
        denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1)
        if denom == 0.0:
            break
        dw = f / denom
        w -= dw
        if fabs(dw) <= 1e-15 * (1.0 + fabs(w)):
            break
    return w


cdef double _w_of_exp(double z) noexcept nogil:
    cdef double w = z - log(z), f, dw
    cdef int k
    for k in range(_NEWTON_MAX_ITER):
        f = w + log(w) - z
        dw = f / (1.0 + 1.0 / w)
        w -= dw
        if fabs(dw) <= 1e-15 * w:
            break
    return w


cdef int _prox_power_scalar(double y, double w, double p, double* out) noexcept nogil:
    # returns 0 on success, -1 on non-convergence
    cdef double a = fabs(y), sbar, s, lo, hi, h, dh, s_new, f_int
    cdef int k
    cdef bint done = False
    if a == 0.0:
        out[0] = 0.0
        return 0
    sbar = pow(w * p * (1.0 - p), 1.0 / (2.0 - p))
    if a <= sbar + w * p * pow(sbar, p - 1.0):
        out[0] = 0.0
        return 0
    s = a
    lo = sbar
    hi = a
    for k in range(_NEWTON_MAX_ITER):
        h = s + w * p * pow(s, p - 1.0) - a
        if h > 0.0:
            hi = s
        else:
            lo = s
        dh = 1.0 + w * p * (p - 1.0) * pow(s, p - 2.0)
        if dh > 0.0:
            s_new = s - h / dh
        else:
            s_new = 0.5 * (lo + hi)
        if not (lo < s_new <= hi):
            s_new = 0.5 * (lo + hi)
        if fabs(s_new - s) <= 1e-15 * s_new:
            s = s_new
            done = True
            break
        s = s_new
    if not done:
        return -1
    f_int = 0.5 * (s - a) * (s - a) + w * pow(s, p)
    if f_int < 0.5 * a * a:
        out[0] = copysign(s, y)
    else:
        out[0] = 0.0
    return 0


cdef inline double _soft(double z, double t) noexcept nogil:
    if z > t:
        return z - t
    if z < -t:
        return z + t
    return 0.0


cdef inline double _two_abs(double z, double alpha, double beta, double c) noexcept nogil:
    cdef double cands[6]
    cdef double best = 0.0, best_val = INFINITY, v, x
    cdef int j
    cands[0] = 0.0
    cands[1] = -c
    cands[2] = z - alpha - beta
    cands[3] = z - alpha + beta
    cands[4] = z + alpha - beta
    cands[5] = z + alpha + beta
    for j in range(6):
        x = cands[j]
        v = 0.5 * (x - z) * (x - z) + alpha * fabs(x + c) + beta * fabs(x)
        if v < best_val:
            best_val = v
            best = x
    return best


# ---------------------------------------------------------------- scalar maps


def lambertw0(x):
    cdef const double[::1] xin = np.ascontiguousarray(x, dtype=np.float64).ravel()
    out = np.empty(xin.shape[0])
    cdef double[::1] o = out
    cdef Py_ssize_t i
    with nogil:
        for i in range(xin.shape[0]):
            o[i] = _lambertw0_scalar(xin[i])
    return out.reshape(np.shape(x))


def prox_entropy(y, double lam):
    cdef const double[::1] yin = np.ascontiguousarray(y, dtype=np.float64)
    out = np.empty(yin.shape[0])
    cdef double[::1] o = out
    cdef double loglam = log(lam), z
    cdef Py_ssize_t i
    with nogil:
        for i in range(yin.shape[0]):
            z = loglam + lam * yin[i] - 1.0
            if z > 700.0:
                o[i] = _w_of_exp(z) / lam
            else:
                o[i] = _lambertw0_scalar(exp(z)) / lam
    return out


def prox_power_p(y, double w, double p):
    cdef const double[::1] yin = np.ascontiguousarray(y, dtype=np.float64)
    out = np.empty(yin.shape[0])
    cdef double[::1] o = out
    cdef Py_ssize_t i
    cdef int status = 0
    with nogil:
        for i in range(yin.shape[0]):
            if _prox_power_scalar(yin[i], w, p, &o[i]) != 0:
                status = -1
                break
    if status != 0:
        raise FloatingPointError("l^p prox did not converge")
    return out


def prox_two_abs(z, double alpha, double beta, c):
    """Componentwise argmin of 0.5(x-z)^2 + alpha|x+c| + beta|x|."""
    cdef const double[::1] zin = np.ascontiguousarray(z, dtype=np.float64)
    cdef const double[::1] cin = np.ascontiguousarray(c, dtype=np.float64)
    out = np.empty(zin.shape[0])
    cdef double[::1] o = out
    cdef Py_ssize_t i
    with nogil:
        for i in range(zin.shape[0]):
            o[i] = _two_abs(zin[i], alpha, beta, cin[i])
    return out


# ---------------------------------------------------------------- proximal gradient


def fista_l1(TtT, b, double lam, double step, x0, shift, double a, int max_iter, double tol):
    """Accelerated proximal gradient with adaptive restart.

    Minimizes ``(lam/2) x'TtT x - lam b'x + a||x + shift||_1 + ||x||_1``.
    Returns ``(x, iterations, converged)``.
    """
    cdef const double[:, ::1] G = np.ascontiguousarray(TtT, dtype=np.float64)
    cdef const double[::1] bb = np.ascontiguousarray(b, dtype=np.float64)
    cdef const double[::1] sh = np.ascontiguousarray(shift, dtype=np.float64)
    cdef Py_ssize_t n = bb.shape[0], i
    x_arr = np.array(x0, dtype=np.float64)
    cdef double[::1] x = x_arr
    cdef double[::1] y = x_arr.copy()
    cdef double[::1] g = np.empty(n)
    cdef double[::1] xn = np.empty(n)
    cdef double t = 1.0, t_new, coef, z, d, restart, dx2, xx
    cdef double sa = step * a
    cdef int k
    with nogil:
        for k in range(1, max_iter + 1):
            _symv(G, y, g, n)
            for i in range(n):
                z = y[i] - step * lam * (g[i] - bb[i])
                if a == 0.0:
                    xn[i] = _soft(z, step)
                else:
                    xn[i] = _two_abs(z, sa, step, sh[i])
            restart = 0.0
            dx2 = 0.0
            for i in range(n):
                d = xn[i] - x[i]
                restart += (y[i] - xn[i]) * d
                dx2 += d * d
            if restart > 0.0:
                t = 1.0
                for i in range(n):
                    y[i] = xn[i]
            else:
                t_new = 0.5 * (1.0 + sqrt(1.0 + 4.0 * t * t))
                coef = (t - 1.0) / t_new
                for i in range(n):
                    y[i] = xn[i] + coef * (xn[i] - x[i])
                t = t_new
            xx = 0.0
            for i in range(n):
                x[i] = xn[i]
                xx += x[i] * x[i]
            if sqrt(dx2) <= tol * sqrt(xx) or dx2 == 0.0:
                with gil:
                    return x_arr, k, True
    return x_arr, max_iter, False


cdef double _lp_obj(const double[:, ::1] G, const double[::1] b, double lam, double p,
                    const double[::1] v, double[::1] tmp, Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t i
    cdef double s = 0.0
    _symv(G, v, tmp, n)
    for i in range(n):
        s += 0.5 * lam * v[i] * tmp[i] - lam * b[i] * v[i] + pow(fabs(v[i]), p)
    return s


def pg_lp(TtT, b, double lam, double step, double p, x0, int max_iter, double tol):
    """Monotone proximal gradient for ``(lam/2) x'TtT x - lam b'x + sum|x|^p``."""
    cdef const double[:, ::1] G = np.ascontiguousarray(TtT, dtype=np.float64)
    cdef const double[::1] bb = np.ascontiguousarray(b, dtype=np.float64)
    cdef Py_ssize_t n = bb.shape[0], i
    x_arr = np.array(x0, dtype=np.float64)
    cdef double[::1] x = x_arr
    cdef double[::1] g = np.empty(n)
    cdef double[::1] xn = np.empty(n)
    cdef double[::1] tmp = np.empty(n)
    cdef double f, f_new, d, dx2, xx
    cdef int k, status = 0
    with nogil:
        f = _lp_obj(G, bb, lam, p, x, tmp, n)
        for k in range(1, max_iter + 1):
            _symv(G, x, g, n)
            for i in range(n):
                g[i] = lam * (g[i] - bb[i])
            while True:
                for i in range(n):
                    if _prox_power_scalar(x[i] - step * g[i], step, p, &xn[i]) != 0:
                        status = -1
                        break
                if status != 0:
                    break
                f_new = _lp_obj(G, bb, lam, p, xn, tmp, n)
                if f_new <= f + 1e-14 * fabs(f) or step < 1e-300:
                    break
                step *= 0.5
            if status != 0:
                break
            dx2 = 0.0
            xx = 0.0
            for i in range(n):
                d = xn[i] - x[i]
                dx2 += d * d
                x[i] = xn[i]
                xx += x[i] * x[i]
            f = f_new
            if sqrt(dx2) <= tol * sqrt(xx) or dx2 == 0.0:
                with gil:
                    return x_arr, k, True
    if status != 0:
        raise FloatingPointError("l^p prox did not converge")
    return x_arr, max_iter, False


# ---------------------------------------------------------------- Chambolle-Pock


cdef inline void _dt(const double[::1] y, double[::1] out, Py_ssize_t n) noexcept nogil:
    # D^T y for the forward difference matrix D (n-1 x n)
    cdef Py_ssize_t i
    for i in range(n):
        out[i] = 0.0
    for i in range(n - 1):
        out[i] -= y[i]
        out[i + 1] += y[i]


cdef inline double _clip(double v, double w) noexcept nogil:
    if v > w:
        return w
    if v < -w:
        return -w
    return v


def cp_tv_denoise(f, double lam, double weight, x0, y0, double tau, double sigma,
                  int max_iter, double tol):
    """Accelerated primal-dual iteration for ``(lam/2)||x-f||^2 + weight||Dx||_1``.

    Returns ``(x, y, iterations, gap, converged)``.
    """
    cdef const double[::1] ff = np.ascontiguousarray(f, dtype=np.float64)
    cdef Py_ssize_t n = ff.shape[0], i
    x_arr = np.array(x0, dtype=np.float64)
    y_arr = np.array(y0, dtype=np.float64)
    cdef double[::1] x = x_arr
    cdef double[::1] y = y_arr
    cdef double[::1] xbar = x_arr.copy()
    cdef double[::1] dty = np.empty(n)
    cdef double xo, theta, primal, dual, gap = INFINITY, tv, r, dd, df
    cdef int k
    with nogil:
        for k in range(1, max_iter + 1):
            for i in range(n - 1):
                y[i] = _clip(y[i] + sigma * (xbar[i + 1] - xbar[i]), weight)
            _dt(y, dty, n)
            theta = 1.0 / sqrt(1.0 + 2.0 * lam * tau)
            for i in range(n):
                xo = x[i]
                x[i] = (x[i] - tau * dty[i] + tau * lam * ff[i]) / (1.0 + tau * lam)
                xbar[i] = x[i] + theta * (x[i] - xo)
            tau *= theta
            sigma /= theta
            _dt(y, dty, n)
            tv = 0.0
            for i in range(n - 1):
                tv += fabs(x[i + 1] - x[i])
            r = 0.0
            dd = 0.0
            df = 0.0
            for i in range(n):
                r += (x[i] - ff[i]) * (x[i] - ff[i])
                dd += dty[i] * dty[i]
                df += dty[i] * ff[i]
            primal = 0.5 * lam * r + weight * tv
            dual = df - dd / (2.0 * lam)
            gap = primal - dual
            if gap <= tol * (1.0 + fabs(primal)):
                with gil:
                    return x_arr, y_arr, k, gap, True
    return x_arr, y_arr, max_iter, gap, False


cdef inline void _chol_solve(const double[:, ::1] L, double[::1] rhs, Py_ssize_t n) noexcept nogil:
    # Solves (L L^T) z = rhs in place. A C-contiguous lower L is, in column
    # major storage, the upper factor U = L^T.
    cdef int nn = <int>n, inc = 1
    cdef char up = b'U', tr = b'T', nt = b'N', nd = b'N'
    dtrsv(&up, &tr, &nd, &nn, <double*>&L[0, 0], &nn, &rhs[0], &inc)
    dtrsv(&up, &nt, &nd, &nn, <double*>&L[0, 0], &nn, &rhs[0], &inc)


def cp_tv_general(chol, lam_ttf, double weight, x0, y0, double tau, double sigma,
                  int max_iter, double tol):
    """Primal-dual iteration for ``(lam/2)||Tx-f||^2 + weight||Dx||_1``.

    Returns ``(x, y, iterations, residual, converged)``.
    """
    cdef const double[:, ::1] L = np.ascontiguousarray(chol, dtype=np.float64)
    cdef const double[::1] ltf = np.ascontiguousarray(lam_ttf, dtype=np.float64)
    cdef Py_ssize_t n = ltf.shape[0], i
    x_arr = np.array(x0, dtype=np.float64)
    y_arr = np.array(y0, dtype=np.float64)
    cdef double[::1] x = x_arr
    cdef double[::1] y = y_arr
    cdef double[::1] xbar = x_arr.copy()
    cdef double[::1] xold = np.empty(n)
    cdef double[::1] yold = np.empty(max(n - 1, 0))
    cdef double[::1] dty = np.empty(n)
    cdef double scale = weight * sqrt(<double>n), res = INFINITY, pr, dr, t
    cdef int k
    with nogil:
        for k in range(1, max_iter + 1):
            for i in range(n - 1):
                yold[i] = y[i]
                y[i] = _clip(y[i] + sigma * (xbar[i + 1] - xbar[i]), weight)
            _dt(y, dty, n)
            for i in range(n):
                xold[i] = x[i]
                x[i] = ltf[i] + (x[i] - tau * dty[i]) / tau
            _chol_solve(L, x, n)
            pr = 0.0
            for i in range(n):
                t = (xold[i] - x[i]) / tau
                pr += t * t
            dr = 0.0
            for i in range(n - 1):
                t = (yold[i] - y[i]) / sigma + (xbar[i + 1] - x[i + 1]) - (xbar[i] - x[i])
                dr += t * t
            for i in range(n):
                xbar[i] = 2.0 * x[i] - xold[i]
            res = sqrt(pr + dr) / scale
            if res <= tol:
                with gil:
                    return x_arr, y_arr, k, res, True
    return x_arr, y_arr, max_iter, res, False
