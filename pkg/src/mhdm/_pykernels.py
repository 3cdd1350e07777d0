"""Pure-Python/NumPy implementations of the hot inner loops.

Every function here has a twin with an identical signature in the compiled
``_ckernels`` extension. :mod:`mhdm._backend` picks one at import time.
"""

import math

import numpy as np
import scipy.linalg as sla

NAME = "python"

_INV_E = math.exp(-1.0)
_HALLEY_MAX_ITER = 64
_NEWTON_MAX_ITER = 100


def _lambertw0_scalar(x):
    if x == 0.0:
        return 0.0
    if x <= -_INV_E:
        # caller validated the domain; the tiny overshoot is rounding
        return -1.0
    if x < -0.32:
        p = math.sqrt(2.0 * (math.e * x + 1.0))
        w = -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p * p * p
    elif x <= math.e:
        w = math.log1p(x)
    else:
        l1 = math.log(x)
        l2 = math.log(l1)
        w = l1 - l2 + l2 / l1
    for _ in range(_HALLEY_MAX_ITER):
        ew = math.exp(w)
        f = w * ew - x
        wp1 = w + 1.0
        if wp1 == 0.0:
            break
        denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1)
        if denom == 0.0:
            break
        dw = f / denom
        w -= dw
        if abs(dw) <= 1e-15 * (1.0 + abs(w)):
            break
    return w


def lambertw0(x):
    x = np.ascontiguousarray(x, dtype=np.float64)
    out = np.empty_like(x)
    flat_in = x.ravel()
    flat_out = out.ravel()
    for i in range(flat_in.size):
        flat_out[i] = _lambertw0_scalar(float(flat_in[i]))
    return out


def _w_of_exp(z):
    """W(exp(z)) for large z, solving w + log(w) = z by Newton."""
    w = z - math.log(z)
    for _ in range(_NEWTON_MAX_ITER):
        f = w + math.log(w) - z
        dw = f / (1.0 + 1.0 / w)
        w -= dw
        if abs(dw) <= 1e-15 * w:
            break
    return w


def prox_entropy(y, lam):
    y = np.ascontiguousarray(y, dtype=np.float64)
    out = np.empty_like(y)
    loglam = math.log(lam)
    for i in range(y.size):
        z = loglam + lam * float(y[i]) - 1.0
        if z > 700.0:
            out[i] = _w_of_exp(z) / lam
        else:
            out[i] = _lambertw0_scalar(math.exp(z)) / lam
    return out


def _prox_power_scalar(y, w, p):
    a = abs(y)
    if a == 0.0:
        return 0.0
    # g(s) = s + w p s^(p-1) is convex on s > 0 with minimum at sbar
    sbar = (w * p * (1.0 - p)) ** (1.0 / (2.0 - p))
    if a <= sbar + w * p * sbar ** (p - 1.0):
        return 0.0
    s = a
    lo = sbar
    hi = a
    for _ in range(_NEWTON_MAX_ITER):
        h = s + w * p * s ** (p - 1.0) - a
        if h > 0.0:
            hi = s
        else:
            lo = s
        dh = 1.0 + w * p * (p - 1.0) * s ** (p - 2.0)
        s_new = s - h / dh if dh > 0.0 else 0.5 * (lo + hi)
        if not (lo < s_new <= hi):
            s_new = 0.5 * (lo + hi)
        if abs(s_new - s) <= 1e-15 * s_new:
            s = s_new
            break
        s = s_new
    else:
        raise FloatingPointError("l^p prox did not converge")
    f_int = 0.5 * (s - a) ** 2 + w * s**p
    if f_int < 0.5 * a * a:
        return math.copysign(s, y)
    return 0.0


def prox_power_p(y, w, p):
    y = np.ascontiguousarray(y, dtype=np.float64)
    out = np.empty_like(y)
    for i in range(y.size):
        out[i] = _prox_power_scalar(float(y[i]), w, p)
    return out


def _soft(z, t):
    return np.sign(z) * np.maximum(np.abs(z) - t, 0.0)


def prox_two_abs(z, alpha, beta, c):
    """Componentwise argmin of 0.5(x-z)^2 + alpha|x+c| + beta|x|."""
    z = np.asarray(z, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    cands = np.stack([
        np.zeros_like(z), -c,
        z - alpha - beta, z - alpha + beta, z + alpha - beta, z + alpha + beta,
    ])
    vals = 0.5 * (cands - z) ** 2 + alpha * np.abs(cands + c) + beta * np.abs(cands)
    return cands[np.argmin(vals, axis=0), np.arange(z.size)]


def _l1_prox(z, step, a, shift):
    if a == 0.0:
        return _soft(z, step)
    return prox_two_abs(z, step * a, step, shift)


def fista_l1(TtT, b, lam, step, x0, shift, a, max_iter, tol):
    """Accelerated proximal gradient with adaptive restart.

    Minimizes ``(lam/2) x'TtT x - lam b'x + a||x + shift||_1 + ||x||_1``.
    Returns ``(x, iterations, converged)``.
    """
    x = np.array(x0, dtype=np.float64)
    y = x.copy()
    t = 1.0
    for k in range(1, max_iter + 1):
        grad = lam * (TtT @ y - b)
        x_new = _l1_prox(y - step * grad, step, a, shift)
        d = x_new - x
        if np.dot(y - x_new, d) > 0.0:
            t = 1.0
            y = x_new.copy()
        else:
            t_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
            y = x_new + ((t - 1.0) / t_new) * d
            t = t_new
        dx = math.sqrt(np.dot(d, d))
        x = x_new
        if dx <= tol * math.sqrt(np.dot(x, x)) or dx == 0.0:
            return x, k, True
    return x, max_iter, False


def pg_lp(TtT, b, lam, step, p, x0, max_iter, tol):
    """Monotone proximal gradient for ``(lam/2) x'TtT x - lam b'x + sum|x|^p``."""
    x = np.array(x0, dtype=np.float64)

    def obj(v):
        return 0.5 * lam * np.dot(v, TtT @ v) - lam * np.dot(b, v) + np.sum(np.abs(v) ** p)

    f = obj(x)
    for k in range(1, max_iter + 1):
        grad = lam * (TtT @ x - b)
        while True:
            x_new = prox_power_p(x - step * grad, step, p)
            f_new = obj(x_new)
            if f_new <= f + 1e-14 * abs(f) or step < 1e-300:
                break
            step *= 0.5
        d = x_new - x
        dx = math.sqrt(np.dot(d, d))
        x = x_new
        f = f_new
        if dx <= tol * math.sqrt(np.dot(x, x)) or dx == 0.0:
            return x, k, True
    return x, max_iter, False


def _tv_value(x, w):
    return w * np.sum(np.abs(np.diff(x)))


def _dt(y, n):
    # D^T y for the forward difference matrix D (n-1 x n)
    out = np.zeros(n)
    out[:-1] -= y
    out[1:] += y
    return out


def cp_tv_denoise(f, lam, weight, x0, y0, tau, sigma, max_iter, tol):
    """Accelerated primal-dual iteration for ``(lam/2)||x-f||^2 + weight||Dx||_1``.

    The primal term is ``lam``-strongly convex, so step sizes follow the
    accelerated schedule. Stops on the duality gap. Returns
    ``(x, y, iterations, gap, converged)``.
    """
    f = np.asarray(f, dtype=np.float64)
    n = f.size
    x = np.array(x0, dtype=np.float64)
    y = np.array(y0, dtype=np.float64)
    xbar = x.copy()
    gap = math.inf
    for k in range(1, max_iter + 1):
        y = np.clip(y + sigma * np.diff(xbar), -weight, weight)
        x_old = x
        x = (x - tau * _dt(y, n) + tau * lam * f) / (1.0 + tau * lam)
        theta = 1.0 / math.sqrt(1.0 + 2.0 * lam * tau)
        tau *= theta
        sigma /= theta
        xbar = x + theta * (x - x_old)
        dty = _dt(y, n)
        primal = 0.5 * lam * np.dot(x - f, x - f) + _tv_value(x, weight)
        dual = np.dot(dty, f) - np.dot(dty, dty) / (2.0 * lam)
        gap = primal - dual
        if gap <= tol * (1.0 + abs(primal)):
            return x, y, k, gap, True
    return x, y, max_iter, gap, False


def cp_tv_general(chol, lam_ttf, weight, x0, y0, tau, sigma, max_iter, tol):
    """Primal-dual iteration for ``(lam/2)||Tx-f||^2 + weight||Dx||_1``.

    ``chol`` is the lower Cholesky factor of ``lam T'T + I/tau`` and
    ``lam_ttf`` is ``lam T'f``. Stops when the primal-dual residual falls
    below ``tol`` relative to ``weight * sqrt(n)``, the size of the dual
    feasible box. Returns ``(x, y, iterations, residual, converged)``.
    """
    n = lam_ttf.size
    x = np.array(x0, dtype=np.float64)
    y = np.array(y0, dtype=np.float64)
    xbar = x.copy()
    scale = weight * math.sqrt(n)
    res = math.inf
    factor = (chol, True)
    for k in range(1, max_iter + 1):
        y_old = y
        y = np.clip(y + sigma * np.diff(xbar), -weight, weight)
        x_old = x
        x = sla.cho_solve(factor, lam_ttf + (x - tau * _dt(y, n)) / tau, check_finite=False)
        pres = (x_old - x) / tau
        dres = (y_old - y) / sigma + np.diff(xbar - x)
        xbar = 2.0 * x - x_old
        res = math.sqrt(np.dot(pres, pres) + np.dot(dres, dres)) / scale
        if res <= tol:
            return x, y, k, res, True
    return x, y, max_iter, res, False
