"""Lambert W and one-dimensional proximal maps.

Scalar entry points accept and return Python floats. The ``*_vec``
variants run the selected kernel backend over arrays.
"""

import math

import numpy as np

from ._backend import kernels

__all__ = [
    "lambert_w0",
    "lambert_w0_vec",
    "prox_entropy_scalar",
    "prox_entropy_vec",
    "prox_abs",
    "prox_abs_vec",
    "prox_power_p",
    "prox_power_p_vec",
    "power_objective",
]

INV_E = math.exp(-1.0)


def _check_w_domain(x):
    x = np.asarray(x)
    if np.any(np.isnan(x)) or np.any(x < -INV_E - 1e-16):
        raise ValueError("Lambert W0 is defined for x >= -1/e")


def lambert_w0(x):
    """Principal branch of the Lambert W function, ``w * exp(w) = x``.

    Halley iteration started from a branch-point series near ``-1/e``,
    ``log1p(x)`` on moderate arguments and the asymptotic expansion for
    large ones.
    """
    x = float(x)
    _check_w_domain(x)
    return float(kernels.lambertw0(np.array([x]))[0])


def lambert_w0_vec(x):
    x = np.asarray(x, dtype=np.float64)
    _check_w_domain(x)
    return kernels.lambertw0(x.ravel()).reshape(x.shape)


def prox_entropy_scalar(y, lam):
    """``argmin_x (lam/2)(x - y)^2 + x log x`` = ``W(lam exp(lam y - 1)) / lam``.

    When ``log(lam) + lam*y - 1 > 700`` the argument of W would overflow;
    W(e^z) is then obtained from ``w + log w = z`` instead.
    """
    if not lam > 0:
        raise ValueError("lambda must be positive")
    return float(kernels.prox_entropy(np.array([float(y)]), float(lam))[0])


def prox_entropy_vec(y, lam):
    if not lam > 0:
        raise ValueError("lambda must be positive")
    y = np.asarray(y, dtype=np.float64)
    return kernels.prox_entropy(y.ravel(), float(lam)).reshape(y.shape)


def prox_abs(y, tau):
    """Soft thresholding of ``y`` at level ``tau``."""
    if not tau > 0:
        raise ValueError("tau must be positive")
    if y > tau:
        return y - tau
    if y < -tau:
        return y + tau
    return 0.0


def prox_abs_vec(y, tau):
    if not tau > 0:
        raise ValueError("tau must be positive")
    y = np.asarray(y, dtype=np.float64)
    return np.sign(y) * np.maximum(np.abs(y) - tau, 0.0)


def power_objective(s, y, w, p):
    return 0.5 * (s - y) ** 2 + w * abs(s) ** p


def prox_power_p(y, w, p):
    """Global minimizer of ``0.5 (s - y)^2 + w |s|^p`` for ``0 < p < 1``.

    The interior stationary point on the sign of ``y`` is found by a
    safeguarded Newton iteration from ``|y|``; it is kept only if it beats
    ``s = 0`` strictly, so ties resolve to zero.

    Raises
    ------
    FloatingPointError
        If neither Newton nor the bisection fallback converges.
    """
    _check_power_args(w, p)
    return float(kernels.prox_power_p(np.array([float(y)]), float(w), float(p))[0])


def prox_power_p_vec(y, w, p):
    _check_power_args(w, p)
    y = np.asarray(y, dtype=np.float64)
    return kernels.prox_power_p(y.ravel(), float(w), float(p)).reshape(y.shape)


def _check_power_args(w, p):
    if not w > 0:
        raise ValueError("w must be positive")
    if not 0 < p < 1:
        raise ValueError("p must lie in (0, 1)")
