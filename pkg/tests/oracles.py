"""Independent reference computations used by the tests.

Nothing here imports the package's solvers: each oracle is a brute-force
or textbook computation (bisection, dense grids, cvxpy, exact fractions).
"""

import itertools
import math
from fractions import Fraction

import numpy as np


def lambert_bisect(x, iters=200):
    """Principal Lambert W by bisection on ``w e^w - x``."""
    lo, hi = -1.0, max(1.0, math.log1p(x) + 1.0)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if mid * math.exp(mid) > x:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def prox_power_grid(y, w, p, step=1e-5):
    """Minimize ``0.5 (s - y)^2 + w |s|^p`` over ``s`` between 0 and ``y``.

    A dense grid locates the basin, a ternary search polishes it; the
    result is compared against ``s = 0``.
    """
    sgn = 1.0 if y >= 0 else -1.0
    a = abs(y)
    f = lambda s: 0.5 * (s - a) ** 2 + w * s ** p
    if a == 0:
        return 0.0
    s = np.arange(0.0, a + step, step)
    i = int(np.argmin(f(s)))
    lo, hi = max(0.0, s[i] - step), min(a, s[i] + step)
    for _ in range(200):
        m1, m2 = lo + (hi - lo) / 3, hi - (hi - lo) / 3
        if f(m1) < f(m2):
            hi = m2
        else:
            lo = m1
    best = 0.5 * (lo + hi)
    return sgn * best if f(best) < f(0.0) else 0.0


def soft(y, tau):
    y = np.asarray(y, dtype=float)
    return np.sign(y) * np.maximum(np.abs(y) - tau, 0.0)


def _dense(T):
    return np.asarray(getattr(T, "matrix", T), dtype=float)


def cvx_l1(T, f, lam):
    import cvxpy as cp

    T = _dense(T)

    x = cp.Variable(T.shape[1])
    cp.Problem(cp.Minimize(lam / 2 * cp.sum_squares(T @ x - f) + cp.norm1(x))).solve(
        solver=cp.CLARABEL)
    return np.asarray(x.value)


def cvx_tv(T, f, lam, w):
    import cvxpy as cp

    T = _dense(T)

    x = cp.Variable(T.shape[1])
    obj = lam / 2 * cp.sum_squares(T @ x - f) + w * cp.norm1(cp.diff(x))
    cp.Problem(cp.Minimize(obj)).solve(solver=cp.CLARABEL)
    return np.asarray(x.value)


def tv_on_jump_set(f, lam, w, jumps):
    """TV denoising restricted to signals constant between fixed jump indices.

    Returns the optimal piecewise-constant signal (a small QP solved by cvxpy).
    """
    import cvxpy as cp

    edges = [0, *jumps, len(f)]
    c = cp.Variable(len(edges) - 1)
    fit = sum(cp.sum_squares(c[k] - f[edges[k]:edges[k + 1]]) for k in range(len(edges) - 1))
    obj = lam / 2 * fit + w * cp.norm1(cp.diff(c))
    cp.Problem(cp.Minimize(obj)).solve(solver=cp.CLARABEL)
    out = np.empty(len(f))
    for k in range(len(edges) - 1):
        out[edges[k]:edges[k + 1]] = c.value[k]
    return out


def cone_by_definition(A):
    """Positive cone test straight from the subset definition."""
    A = np.asarray(A, dtype=float)
    m = A.shape[1]
    for size in range(1, m + 1):
        for J in itertools.combinations(range(m), size):
            S = np.linalg.inv(A[:, J].T @ A[:, J])
            for i in range(size):
                off = sum(abs(S[i, j]) for j in range(size) if j != i)
                if S[i, i] - off < -1e-9 * max(1.0, np.abs(S).max()):
                    return False
    return True


def counterexample_exact(lam):
    """Piecewise minimizer of the 2x2 counterexample in exact rationals."""
    lam = Fraction(lam)
    if lam <= Fraction(1, 7):
        return (Fraction(0), Fraction(0))
    if lam <= Fraction(1, 2):
        return (Fraction(7, 5) - 1 / (5 * lam), Fraction(0))
    if lam <= 1:
        return (1 / lam - 1, 6 - 3 / lam)
    if lam <= 3:
        return (Fraction(0), 4 - 1 / lam)
    return (3 / lam - 1, 6 - 7 / lam)


def iterated_tikhonov_identity(f, lam, steps):
    """``x_n = (lam f + x_{n-1}) / (1 + lam)`` unrolled."""
    x = np.zeros_like(f)
    out = []
    for _ in range(steps):
        x = (lam * f + x) / (1.0 + lam)
        out.append(x.copy())
    return out


def rounded_square_limit(lambda_k, lambda_k1):
    """Continuum value of the 2-D condition residual via the coarea formula.

    All three fields are functions of ``r``; the level sets ``{r = rho}``
    have length ``2 pi rho`` and the integrand is nonzero only on the ramp
    of ``x_{lambda_k}``, giving ``coef * 2 pi * log(c lambda_k)`` with
    ``c = 1/(1 + sqrt(pi)/2)``.
    """
    c = 1.0 / (1.0 + math.sqrt(math.pi) / 2.0)
    ik, ik1 = 1.0 / lambda_k, 1.0 / lambda_k1
    coef = abs(ik1 - ik) + ik1 - abs(2 * ik1 - ik)
    return coef * 2.0 * math.pi * math.log(c / ik)


def rounded_square_length_check():
    """Length of ``a + b + sqrt(2ab) = 1`` in the unit quadrant (should be pi/2)."""
    th = np.linspace(0.0, math.pi / 2, 200001)
    rho = 1.0 / (np.cos(th) + np.sin(th) + np.sqrt(2.0 * np.cos(th) * np.sin(th)))
    pts = np.stack([rho * np.cos(th), rho * np.sin(th)], axis=1)
    return float(np.sum(np.linalg.norm(np.diff(pts, axis=0), axis=1)))
