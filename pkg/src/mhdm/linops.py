"""Dense linear operators with exact adjoints.

Signals are plain 1-D float arrays. Operators are small (n <= 512) and
always materialized, so the adjoint is the transpose of the stored matrix.
"""

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.linalg as sla

from .errors import NumericalFailure

__all__ = [
    "LinearMap",
    "grid_nodes",
    "grid_spacing",
    "as_signal",
    "identity",
    "from_matrix",
    "make_gaussian_conv",
    "diff_matrix",
    "substitution_operator",
    "op_norm_estimate",
]


def grid_nodes(n):
    """``n`` equidistant nodes covering [0, 1], endpoints included."""
    return np.linspace(0.0, 1.0, n)


def grid_spacing(n):
    """Quadrature weight of one cell for a grid function on [0, 1]."""
    return 1.0 / n


def as_signal(values, n=None):
    """Validate and return ``values`` as a finite 1-D float array."""
    x = np.asarray(values, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError(f"signal must be one-dimensional, got shape {x.shape}")
    if n is not None and x.size != n:
        raise ValueError(f"signal has length {x.size}, expected {n}")
    if not np.all(np.isfinite(x)):
        raise ValueError("signal contains non-finite entries")
    return x


@dataclass(frozen=True, eq=False)
class LinearMap:
    """A linear operator ``R^cols -> R^rows`` backed by a dense matrix.

    Attributes
    ----------
    kind : str
        One of ``"matrix"``, ``"identity"``, ``"gaussian"``, ``"diff"``,
        ``"substitution"``. Solvers use it to pick exact paths.
    matrix : ndarray, shape (rows, cols)
    params : dict
        Construction parameters (e.g. ``sigma`` for Gaussian blur).
    """

    kind: str
    matrix: np.ndarray
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        m = np.array(self.matrix, dtype=np.float64)
        if m.ndim != 2:
            raise ValueError("operator matrix must be two-dimensional")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def rows(self):
        return self.matrix.shape[0]

    @property
    def cols(self):
        return self.matrix.shape[1]

    @property
    def shape(self):
        return self.matrix.shape

    @property
    def is_identity(self):
        return self.kind == "identity"

    def apply(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.shape[0] != self.cols:
            raise ValueError(f"expected input of length {self.cols}, got {x.shape[0]}")
        if self.is_identity:
            return x.copy()
        return self.matrix @ x

    def adjoint(self, y):
        y = np.asarray(y, dtype=np.float64)
        if y.shape[0] != self.rows:
            raise ValueError(f"expected input of length {self.rows}, got {y.shape[0]}")
        if self.is_identity:
            return y.copy()
        return self.matrix.T @ y

    __call__ = apply

    def __matmul__(self, x):
        return self.apply(x)

    @cached_property
    def gram(self):
        """``A^T A`` as a C-contiguous array."""
        g = np.ascontiguousarray(self.matrix.T @ self.matrix)
        g.setflags(write=False)
        return g

    @cached_property
    def norm(self):
        """Spectral norm, cached per operator."""
        if self.is_identity:
            return 1.0
        return op_norm_estimate(self, 1e-10)

    def __repr__(self):
        extra = "".join(f", {k}={v!r}" for k, v in self.params.items())
        return f"LinearMap({self.kind!r}, {self.rows}x{self.cols}{extra})"


def identity(n):
    if n < 1:
        raise ValueError("n must be positive")
    return LinearMap("identity", np.eye(n), {"n": n})


def from_matrix(matrix):
    return LinearMap("matrix", matrix)


def make_gaussian_conv(n, sigma):
    """Gaussian blur on ``n`` nodes of [0, 1] with standard deviation ``sigma``.

    Column ``j`` holds the kernel centred at node ``j``, truncated at the
    domain boundary and scaled to unit sum.
    """
    if n < 3:
        raise ValueError("gaussian convolution needs n >= 3")
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    t = grid_nodes(n)
    k = np.exp(-((t[:, None] - t[None, :]) ** 2) / (2.0 * sigma * sigma))
    k /= k.sum(axis=0, keepdims=True)
    return LinearMap("gaussian", k, {"sigma": float(sigma)})


def diff_matrix(n):
    """Forward differences, ``(n-1) x n`` with -1 on the diagonal."""
    if n < 2:
        raise ValueError("diff_matrix needs n >= 2")
    d = np.zeros((n - 1, n))
    idx = np.arange(n - 1)
    d[idx, idx] = -1.0
    d[idx, idx + 1] = 1.0
    return LinearMap("diff", d, {"n": n})


def _ddt_banded(m):
    # D D^T = tridiag(-1, 2, -1) in upper banded storage for solveh_banded
    ab = np.empty((2, m))
    ab[0, 0] = 0.0
    ab[0, 1:] = -1.0
    ab[1, :] = 2.0
    return ab


def solve_ddt(rhs):
    """Solve ``(D D^T) z = rhs`` for the tridiagonal second-difference matrix."""
    rhs = np.asarray(rhs, dtype=np.float64)
    if rhs.shape[0] == 1:
        # the banded solver rejects a 1x1 system
        return rhs / 2.0
    return sla.solveh_banded(_ddt_banded(rhs.shape[0]), rhs)


def substitution_operator(n):
    """``D^T (D D^T)^{-1}``, mapping jump vectors to zero-mean signals."""
    if n < 2:
        raise ValueError("substitution_operator needs n >= 2")
    d = diff_matrix(n).matrix
    coeff = solve_ddt(np.eye(n - 1))
    return LinearMap("substitution", d.T @ coeff, {"n": n})


def op_norm_estimate(A, tol=1e-10, max_iter=100_000):
    """Spectral norm of ``A`` by power iteration on ``A^T A``.

    Raises
    ------
    NumericalFailure
        If the relative change does not drop below ``tol`` within
        ``max_iter`` iterations; ``last_estimate`` carries the final value.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if A.is_identity:
        return 1.0
    gram = A.gram
    n = gram.shape[0]
    # deterministic start with no exact symmetry
    v = 1.0 + 0.1 * np.cos(np.arange(n) * 1.618)
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(max_iter):
        w = gram @ v
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        new = float(v @ w)
        v = w / nw
        if abs(new - est) <= tol * new:
            # one more Rayleigh quotient from the normalized vector
            return float(np.sqrt(max(new, float(v @ (gram @ v)))))
        est = new
    raise NumericalFailure("power iteration did not converge", last_estimate=float(np.sqrt(est)))
