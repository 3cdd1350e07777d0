"""Diagnostics for MHDM runs and Tikhonov minimizers.

Decomposition identities, the condition under which an MHDM step agrees
with a Tikhonov minimizer, positive-cone checks, dual seminorms and a few
closed-form reference minimizers.
"""

from dataclasses import dataclass
import csv
import io
import itertools
import math
from typing import Optional, Tuple
import warnings

import numpy as np
import scipy.linalg as sla

from . import linops, penalties

__all__ = [
    "decomposition_identity_residual",
    "identity_residual_trace",
    "bregman_decomposition_residual",
    "consistency_errors",
    "residual_increase",
    "ConeReport",
    "positive_cone_check",
    "AgreementReport",
    "condition2_residual",
    "agreement_report",
    "counterexample_minimizer",
    "COUNTEREXAMPLE_T",
    "COUNTEREXAMPLE_F",
    "dual_seminorm_l1",
    "dual_seminorm_tv1d",
    "optimality_certificate",
    "bregman_distance",
    "rate_bound",
    "entropy_escalation_check",
    "Grid2D",
    "CoarseGridWarning",
    "SubgradientWarning",
    "rounded_square_minimizer",
    "condition2_2d_violation",
]


# ---------------------------------------------------------------- decomposition identities


def _uses_seminorm_form(decomp):
    J = decomp.penalty
    return decomp.variant in ("mhdm", "flexible") and J is not None and J.is_seminorm


def identity_residual_trace(decomp, f=None, T=None, form="auto"):
    """Relative identity residual after each step ``n`` (see
    :func:`decomposition_identity_residual`)."""
    f = decomp.data if f is None else linops.as_signal(f)
    T = decomp.operator if T is None else T
    if form == "auto":
        form = "seminorm" if _uses_seminorm_form(decomp) else "inner"
    if form not in ("seminorm", "inner"):
        raise ValueError(f"unknown identity form {form!r}")
    if form == "seminorm" and decomp.penalty is None:
        raise ValueError("seminorm form needs a constant penalty")
    fnorm2 = float(np.dot(f, f))
    out = []
    acc = 0.0
    for k, u in enumerate(decomp.components):
        tu = T.apply(u)
        v = f - T.apply(decomp.partial_sums[k])
        if form == "seminorm":
            pairing = penalties.evaluate(decomp.penalty, u) / decomp.lambdas[k]
        else:
            pairing = float(np.dot(T.adjoint(v), u))
        acc += float(np.dot(tu, tu)) + 2.0 * pairing
        if fnorm2 == 0.0:
            out.append(0.0)
        else:
            out.append(abs(fnorm2 - float(np.dot(v, v)) - acc) / fnorm2)
    return out


def decomposition_identity_residual(decomp, f=None, T=None, form="auto"):
    """Relative residual of ``||f||^2 = ||v_n||^2 + sum_k (||Tu_k||^2 + 2 c_k)``.

    ``c_k = <T'v_k, u_k>`` in the ``"inner"`` form, which holds for any
    sequence of components. The ``"seminorm"`` form uses
    ``c_k = J(u_k)/lambda_k`` and holds only at exact minimizers of a
    seminorm-penalized problem, so it doubles as an optimality test.
    ``"auto"`` picks the seminorm form for standard runs with l1 or TV.
    Everything is recomputed from the partial sums, ``f`` and ``T``.
    Returns 0 when ``f = 0``.
    """
    trace = identity_residual_trace(decomp, f, T, form)
    return trace[-1] if trace else 0.0


def bregman_decomposition_residual(decomp, f=None, T=None):
    """Relative residual of
    ``||f||^2 = ||Tx_n - f||^2 + sum_k (||Tu_k||^2 + 2 D_k / lambda_k)``.

    ``D_k`` is the symmetric Bregman distance between ``x_k`` and
    ``x_{k-1}``: ``||u_k||^2`` for the quadratic penalty and
    ``<p_k - p_{k-1}, u_k>`` with the stored subgradients otherwise.
    """
    if decomp.bregman is None:
        raise ValueError("decomposition carries no Bregman state")
    f = decomp.data if f is None else linops.as_signal(f)
    T = decomp.operator if T is None else T
    fnorm2 = float(np.dot(f, f))
    if fnorm2 == 0.0 or not decomp.components:
        return 0.0
    quadratic = decomp.penalty is not None and decomp.penalty.kind == "quadratic"
    acc = 0.0
    p_prev = np.zeros(T.cols)
    for k, u in enumerate(decomp.components):
        p = decomp.bregman.subgradients[k]
        dsym = float(np.dot(u, u)) if quadratic else float(np.dot(p - p_prev, u))
        tu = T.apply(u)
        acc += float(np.dot(tu, tu)) + 2.0 * dsym / decomp.lambdas[k]
        p_prev = p
    v = f - T.apply(decomp.final)
    return abs(fnorm2 - float(np.dot(v, v)) - acc) / fnorm2


def consistency_errors(decomp):
    """Largest relative errors of the stored partial sums and residual norms.

    Returns ``(partial_sum_error, residual_norm_error)``.
    """
    ps_err = 0.0
    acc = np.zeros(decomp.operator.cols)
    for u, x in zip(decomp.components, decomp.partial_sums):
        acc = acc + u
        ps_err = max(ps_err, float(np.linalg.norm(acc - x)) / max(1.0, float(np.linalg.norm(x))))
    res_err = 0.0
    for k, r in enumerate(decomp.residual_norms):
        true = float(np.linalg.norm(decomp.residual_at(k)))
        res_err = max(res_err, abs(true - r) / max(1e-300, true, r) if true or r else 0.0)
    return ps_err, res_err


def residual_increase(decomp):
    """Largest step-to-step increase of ``||v_n||``; nonpositive when monotone."""
    r = np.asarray(decomp.residual_norms)
    norm_f = float(np.linalg.norm(decomp.data))
    first = r[0] - norm_f if r.size else 0.0
    return float(max(first, np.max(np.diff(r)) if r.size > 1 else -np.inf))


# ---------------------------------------------------------------- positive cone


@dataclass(frozen=True)
class ConeReport:
    """Outcome of a positive-cone test.

    ``witness`` is ``(columns, row, margin)`` for the worst row found,
    with ``margin = S_ii - sum_{j != i} |S_ij|``; it is set whenever the
    test fails. Indices are zero-based.
    """

    is_positive_cone: bool
    witness: Optional[Tuple[Tuple[int, ...], int, float]]
    method: str
    min_margin: float
    subsets_checked: int = 1

    def to_text(self):
        lines = [f"positive cone: {'YES' if self.is_positive_cone else 'NO'}",
                 f"method: {self.method}",
                 f"subsets checked: {self.subsets_checked}",
                 f"min margin: {self.min_margin:.12g}"]
        if self.witness is not None:
            cols, row, margin = self.witness
            lines.append(f"witness: columns {list(cols)} row {row} margin {margin:.12g}")
        return "\n".join(lines) + "\n"

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["is_positive_cone", "method", "subsets_checked", "min_margin",
                    "witness_columns", "witness_row", "witness_margin"])
        if self.witness is None:
            wc, wr, wm = "", "", ""
        else:
            wc = " ".join(str(c) for c in self.witness[0])
            wr, wm = self.witness[1], repr(self.witness[2])
        w.writerow([int(self.is_positive_cone), self.method, self.subsets_checked,
                    repr(self.min_margin), wc, wr, wm])
        return buf.getvalue()


def _row_margins(S):
    a = np.abs(S)
    return np.diag(S) - (a.sum(axis=1) - np.diag(a))


MAX_EXHAUSTIVE_COLS = 20


def _gram_inverse(A):
    # (A'A)^{-1} = R^{-1} R^{-T} from A = QR; inverting A'A directly squares the condition number
    R = np.linalg.qr(A, mode="r")
    Rinv = sla.solve_triangular(R, np.eye(R.shape[0]))
    return Rinv @ Rinv.T


def positive_cone_check(A, exhaustive=False):
    """Test whether ``A`` satisfies the positive cone condition.

    By default the diagonal dominance of ``S = (A'A)^{-1}`` is tested.
    With ``exhaustive=True`` every nonempty column subset ``J`` is
    checked through ``S_J = (A_J' A_J)^{-1}``.

    Raises
    ------
    ValueError
        If ``A`` is not injective (relative smallest singular value below
        1e-10) or if the exhaustive test is asked for more than 20 columns.
    """
    A = np.asarray(A.matrix if isinstance(A, linops.LinearMap) else A, dtype=np.float64)
    if A.ndim != 2 or A.shape[1] == 0:
        raise ValueError("A must be a nonempty two-dimensional matrix")
    m = A.shape[1]
    if A.shape[0] < m:
        raise ValueError("A has more columns than rows and cannot be injective")
    sv = np.linalg.svd(A, compute_uv=False)
    if sv[-1] <= 1e-10 * sv[0]:
        raise ValueError("A is rank deficient (not injective)")
    if exhaustive and m > MAX_EXHAUSTIVE_COLS:
        raise ValueError(f"exhaustive check refused for {m} > {MAX_EXHAUSTIVE_COLS} columns")
    subsets = (
        (c for size in range(1, m + 1) for c in itertools.combinations(range(m), size))
        if exhaustive else [tuple(range(m))]
    )
    worst, worst_rel = None, math.inf
    count = 0
    for cols in subsets:
        idx = np.asarray(cols)
        S = _gram_inverse(A[:, idx])
        margins = _row_margins(S)
        i = int(np.argmin(margins))
        # margins compared relative to the size of S
        rel = float(margins[i]) / max(1.0, float(np.max(np.abs(S))))
        if rel < worst_rel:
            worst, worst_rel = (cols, cols[i], float(margins[i])), rel
        count += 1
    cols, row, margin = worst
    ok = worst_rel >= -1e-12
    return ConeReport(
        is_positive_cone=bool(ok),
        witness=None if ok else (tuple(int(c) for c in cols), int(row), margin),
        method="subset-enumeration" if exhaustive else "full-inverse",
        min_margin=margin,
        subsets_checked=count,
    )


# ---------------------------------------------------------------- agreement


def condition2_residual(J, x_prev, x_next):
    """``J(x_next - x_prev) + J(x_next) - J(2 x_next - x_prev)``.

    Nonnegative for seminorms; zero exactly when the MHDM step from
    ``x_prev`` lands on the Tikhonov minimizer ``x_next``.
    """
    if not J.is_seminorm:
        raise ValueError(f"condition2_residual needs a seminorm penalty, got {J.kind}")
    x_prev = np.asarray(x_prev, dtype=np.float64)
    x_next = np.asarray(x_next, dtype=np.float64)
    ev = penalties.evaluate
    return ev(J, x_next - x_prev) + ev(J, x_next) - ev(J, 2.0 * x_next - x_prev)


@dataclass(frozen=True)
class AgreementReport:
    """Condition residuals between consecutive Tikhonov minimizers."""

    residuals: Tuple[float, ...]
    max_violation: float
    verdicts: Tuple[bool, ...]
    tol: float

    @property
    def holds(self):
        return all(self.verdicts)

    def to_text(self):
        lines = [f"agreement condition {'holds' if self.holds else 'FAILS'} "
                 f"(max violation {self.max_violation:.6g}, tol {self.tol:g})"]
        for k, (r, ok) in enumerate(zip(self.residuals, self.verdicts)):
            lines.append(f"  step {k}->{k + 1}: residual {r:.6g} {'ok' if ok else 'VIOLATED'}")
        return "\n".join(lines) + "\n"

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["k", "residual", "holds"])
        for k, (r, ok) in enumerate(zip(self.residuals, self.verdicts)):
            w.writerow([k, repr(r), int(ok)])
        return buf.getvalue()


def agreement_report(J, minimizers, tol=1e-6):
    """Check the agreement condition along a sequence of Tikhonov minimizers.

    A step passes when its residual is at most
    ``tol * (1 + J(x_k) + J(x_{k+1}))``.
    """
    res, ok = [], []
    for a, b in zip(minimizers[:-1], minimizers[1:]):
        r = condition2_residual(J, a, b)
        res.append(r)
        ok.append(r <= tol * (1.0 + penalties.evaluate(J, a) + penalties.evaluate(J, b)))
    return AgreementReport(tuple(res), max(res, default=0.0), tuple(ok), tol)


COUNTEREXAMPLE_T = np.array([[2.0, 1.0], [1.0, 0.0]])
COUNTEREXAMPLE_F = np.array([4.0, -1.0])


def counterexample_minimizer(lam):
    """Closed-form l1-Tikhonov minimizer for ``T = [[2, 1], [1, 0]]``, ``f = (4, -1)``."""
    if not lam > 0:
        raise ValueError("lambda must be positive")
    if lam <= 1.0 / 7.0:
        x = (0.0, 0.0)
    elif lam <= 0.5:
        x = (7.0 / 5.0 - 1.0 / (5.0 * lam), 0.0)
    elif lam <= 1.0:
        x = (1.0 / lam - 1.0, 6.0 - 3.0 / lam)
    elif lam <= 3.0:
        x = (0.0, 4.0 - 1.0 / lam)
    else:
        x = (3.0 / lam - 1.0, 6.0 - 7.0 / lam)
    return np.array(x)


# ---------------------------------------------------------------- dual seminorms, certificates


def dual_seminorm_l1(xstar):
    xstar = np.asarray(xstar, dtype=np.float64)
    return float(np.max(np.abs(xstar))) if xstar.size else 0.0


def dual_seminorm_tv1d(xstar, weight):
    """Dual of ``w ||Dx||_1``: ``||(DD')^{-1} D xstar||_inf / w``.

    Infinite unless ``xstar`` sums to zero (relative tolerance 1e-10),
    since constants have zero total variation.
    """
    if not weight > 0:
        raise ValueError("weight must be positive")
    xstar = np.asarray(xstar, dtype=np.float64)
    nrm = float(np.linalg.norm(xstar))
    if nrm == 0.0:
        return 0.0
    if abs(float(np.sum(xstar))) > 1e-10 * nrm or xstar.size < 2:
        return math.inf
    z = linops.solve_ddt(np.diff(xstar))
    return float(np.max(np.abs(z))) / weight


def optimality_certificate(J, T, f, x, lam):
    """Quantities that certify an l1 or TV Tikhonov minimizer.

    Returns ``(dual, pairing, scaled_penalty)`` with ``r = T'(f - Tx)``,
    ``dual = |r|_*``, ``pairing = <r, x>`` and ``scaled_penalty = J(x)/lam``.
    For TV the mean of ``r`` is removed before taking the dual seminorm.
    At a nonzero minimizer ``dual = 1/lam`` and ``pairing = scaled_penalty``.
    """
    r = T.adjoint(np.asarray(f, float) - T.apply(x))
    if J.kind == "l1":
        dual = dual_seminorm_l1(r)
    elif J.kind == "tv1d":
        # an iterative minimizer leaves a tiny constant part in r; it is slack, not signal
        dual = dual_seminorm_tv1d(r - r.mean(), J.tv_weight(np.asarray(x).size))
    else:
        raise ValueError(f"no dual seminorm for {J.kind}")
    return dual, float(np.dot(r, x)), penalties.evaluate(J, x) / lam


class SubgradientWarning(UserWarning):
    """The supplied dual element failed a subgradient probe."""


def bregman_distance(J, x1, x0, xi, probe=True):
    """``J(x1) - J(x0) - <xi, x1 - x0>``.

    With ``probe=True`` the subgradient inequality
    ``J(x0 + z) >= J(x0) + <xi, z>`` is tested along the coordinate
    directions at two scales; a failure emits :class:`SubgradientWarning`.
    """
    if not J.is_convex:
        raise ValueError("Bregman distance needs a convex penalty")
    x1 = np.asarray(x1, dtype=np.float64)
    x0 = np.asarray(x0, dtype=np.float64)
    xi = np.asarray(xi, dtype=np.float64)
    j0 = penalties.evaluate(J, x0)
    if probe and math.isfinite(j0):
        scale = 1.0 + float(np.max(np.abs(x0), initial=0.0))
        bad = False
        for h in (1e-3 * scale, 1.0 * scale):
            for i in range(x0.size):
                for sgn in (1.0, -1.0):
                    z = np.zeros_like(x0)
                    z[i] = sgn * h
                    if penalties.evaluate(J, x0 + z) < j0 + xi[i] * z[i] - 1e-9 * (1.0 + abs(j0)):
                        bad = True
        if bad:
            warnings.warn("xi is not a subgradient of J at x0", SubgradientWarning, stacklevel=2)
    return penalties.evaluate(J, x1) - j0 - float(np.dot(xi, x1 - x0))


def rate_bound(n, lambda0, C, J_xdagger, delta=0.0):
    """``sqrt(4 C J(x_dagger) / (lambda0 (n + 1)) + delta^2)``."""
    if n < 0 or not lambda0 > 0 or C < 1 or J_xdagger < 0 or delta < 0:
        raise ValueError("invalid rate_bound arguments")
    return math.sqrt(4.0 * C * J_xdagger / (lambda0 * (n + 1)) + delta * delta)


def entropy_escalation_check(decomp, xdagger):
    """True when, on ``E = {i : 0 <= x_dagger_i < 1/e}``, ``x_0 > x_dagger``
    and every iterate strictly exceeds the previous one.

    The increase is tested on the components ``u_n = x_n - x_{n-1}``,
    which stay representable after the partial sums stop changing in
    floating point.

    Raises
    ------
    ValueError
        If ``E`` is empty.
    """
    xdagger = np.asarray(xdagger, dtype=np.float64)
    E = (xdagger >= 0) & (xdagger < math.exp(-1.0))
    if not np.any(E):
        raise ValueError("the set {0 <= x_dagger < 1/e} is empty")
    if not np.all(decomp.partial_sums[0][E] > xdagger[E]):
        return False
    # x_n - x_{n-1} = u_n; late increments fall below one ulp of x_n, so test u_n itself
    return all(np.all(u[E] > 0) for u in decomp.components[1:])


# ---------------------------------------------------------------- 2-D rounded square


class CoarseGridWarning(UserWarning):
    """The 2-D quadrature grid is too coarse for a reliable value."""


@dataclass(frozen=True)
class Grid2D:
    """Cell-centred ``n x n`` grid over ``[-extent, extent]^2``."""

    n: int
    extent: float = 1.0

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("grid needs at least 2 points per axis")
        if not self.extent > 0:
            raise ValueError("extent must be positive")

    @property
    def spacing(self):
        return 2.0 * self.extent / self.n

    def axes(self):
        h = self.spacing
        c = -self.extent + h * (np.arange(self.n) + 0.5)
        return np.meshgrid(c, c, indexing="ij")


RS_CUTOFF = 1.0 / (1.0 + math.sqrt(math.pi) / 2.0)


def _rounded_r(s, t):
    a = 1.0 - np.abs(s)
    b = 1.0 - np.abs(t)
    return a + b + np.sqrt(2.0 * np.clip(a * b, 0.0, None))


def rounded_square_minimizer(lam, grid):
    """TV-denoising minimizer for the indicator of ``[-1, 1]^2`` on ``grid``.

    Three branches in ``r(s, t) = 2 - |s| - |t| + sqrt(2(1-|s|)(1-|t|))``:
    a plateau ``1 - (1 + sqrt(pi)/2)/lam`` where ``r >= 1/(1 + sqrt(pi)/2)``,
    ``1 - 1/(lam r)`` between ``1/lam`` and that cutoff, and zero where
    ``r <= 1/lam`` or outside the square.
    """
    if not lam > 1.0 / RS_CUTOFF:
        raise ValueError(f"lambda must exceed 1 + sqrt(pi)/2 = {1.0 / RS_CUTOFF:.6f}")
    s, t = grid.axes()
    inside = (np.abs(s) <= 1.0) & (np.abs(t) <= 1.0)
    r = np.where(inside, _rounded_r(np.clip(s, -1, 1), np.clip(t, -1, 1)), 0.0)
    inv = 1.0 / lam
    out = np.zeros_like(r)
    plateau = inside & (r >= RS_CUTOFF)
    ramp = inside & (r > inv) & (r < RS_CUTOFF)
    out[plateau] = 1.0 - inv / RS_CUTOFF
    out[ramp] = 1.0 - inv / r[ramp]
    return out


def _tv2d(u, h):
    dx = np.zeros_like(u)
    dy = np.zeros_like(u)
    dx[:-1, :] = u[1:, :] - u[:-1, :]
    dy[:, :-1] = u[:, 1:] - u[:, :-1]
    return h * float(np.sum(np.sqrt(dx * dx + dy * dy)))


def condition2_2d_violation(lambda_k, lambda_k1, grid):
    """Isotropic-TV condition residual between two rounded-square minimizers.

    Returns ``TV(x_k1 - x_k) + TV(x_k1) - TV(2 x_k1 - x_k)`` by forward
    differences. Grids with fewer than 64 points per axis emit
    :class:`CoarseGridWarning`.
    """
    if not (1.0 / RS_CUTOFF < lambda_k <= lambda_k1):
        raise ValueError("need 1 + sqrt(pi)/2 < lambda_k <= lambda_k1")
    if grid.n < 64:
        warnings.warn(f"grid with n={grid.n} < 64 per axis is too coarse", CoarseGridWarning,
                      stacklevel=2)
    a = rounded_square_minimizer(lambda_k, grid)
    b = rounded_square_minimizer(lambda_k1, grid)
    h = grid.spacing
    return _tv2d(b - a, h) + _tv2d(b, h) - _tv2d(2.0 * b - a, h)
