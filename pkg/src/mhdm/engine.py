"""MHDM iteration engines.

Every variant builds the sequence ``x_n = u_0 + ... + u_n`` where ``u_n``
minimizes a Tikhonov-type functional on the residual
``v_{n-1} = f - T x_{n-1}`` (``v_{-1} = f``). The variants differ only in
the penalty applied to ``u_n``.
"""

from dataclasses import dataclass
import math
from typing import Optional, Tuple

import numpy as np
import scipy.linalg as sla

from . import linops, penalties, solvers
from .errors import NumericalFailure, SolverFailure, UnsupportedCombination
from .penalties import (
    BregmanSchedule,
    ConstantSchedule,
    Penalty,
    TightSchedule,
    VaryingExponentSchedule,
)
from .solvers import DEFAULT_OPTIONS

__all__ = [
    "LambdaSchedule",
    "Geometric",
    "Explicit",
    "StoppingRule",
    "FixedCount",
    "Discrepancy",
    "BregmanState",
    "MultiscaleDecomposition",
    "run_mhdm",
    "run_flexible",
    "run_tight",
    "run_bregman",
    "run_iterated_tikhonov",
    "discrepancy_stop_index",
    "inverse_lambda_weights",
]


# ---------------------------------------------------------------- schedules


@dataclass(frozen=True)
class LambdaSchedule:
    """Regularization parameters ``lambda_n``, geometric or explicit."""

    kind: str
    lambda0: float = 1.0
    ratio: float = 2.0
    values: Tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind == "geometric":
            if not (self.lambda0 > 0 and math.isfinite(self.lambda0)):
                raise ValueError("lambda0 must be positive")
            if not self.ratio > 1:
                raise ValueError("geometric ratio must exceed 1")
        elif self.kind == "explicit":
            vals = tuple(float(v) for v in self.values)
            if not vals:
                raise ValueError("explicit schedule is empty")
            if not all(v > 0 and math.isfinite(v) for v in vals):
                raise ValueError("lambda values must be positive and finite")
            object.__setattr__(self, "values", vals)
        else:
            raise ValueError(f"unknown schedule kind {self.kind!r}")

    def value(self, n):
        if n < 0:
            raise IndexError("schedule index must be nonnegative")
        if self.kind == "geometric":
            return self.lambda0 * self.ratio**n
        if n >= len(self.values):
            raise IndexError(f"explicit schedule has only {len(self.values)} entries")
        return self.values[n]

    __getitem__ = value

    @property
    def length(self):
        """Number of available parameters, ``None`` when unbounded."""
        return None if self.kind == "geometric" else len(self.values)

    def first(self, count):
        return np.array([self.value(n) for n in range(count)])


def Geometric(lambda0=1.0, ratio=2.0):
    return LambdaSchedule("geometric", float(lambda0), float(ratio))


def Explicit(values):
    return LambdaSchedule("explicit", values=tuple(values))


@dataclass(frozen=True)
class StoppingRule:
    """``fixed`` runs ``count`` steps; ``discrepancy`` stops at the first
    ``||v_n||^2 < tau * delta^2`` or after ``count`` steps."""

    kind: str
    count: int
    delta: float = 0.0
    tau: float = 1.01

    def __post_init__(self):
        if self.kind not in ("fixed", "discrepancy"):
            raise ValueError(f"unknown stopping rule {self.kind!r}")
        if self.count < 1:
            raise ValueError("step count must be at least 1")
        if self.kind == "discrepancy":
            if self.delta < 0:
                raise ValueError("delta must be nonnegative")
            if not self.tau > 1:
                raise ValueError("tau must exceed 1")

    def reached(self, residual_norm):
        return self.kind == "discrepancy" and residual_norm**2 < self.tau * self.delta**2


def FixedCount(count):
    return StoppingRule("fixed", int(count))


def Discrepancy(delta, tau=1.01, max_n=100):
    return StoppingRule("discrepancy", int(max_n), float(delta), float(tau))


def discrepancy_stop_index(residual_norms, delta, tau):
    """First ``n`` with ``residual_norms[n]**2 < tau * delta**2``, else ``None``."""
    if not tau > 1:
        raise ValueError("tau must exceed 1")
    norms = list(residual_norms)
    if not norms:
        raise ValueError("residual_norms is empty")
    bound = tau * delta * delta
    for n, r in enumerate(norms):
        if r * r < bound:
            return n
    return None


def inverse_lambda_weights(schedule):
    """Tight-MHDM weights ``a_n = 1 / lambda_n``."""
    return lambda n: 1.0 / schedule.value(n)


# ---------------------------------------------------------------- records


def _frozen(a):
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class BregmanState:
    """Subgradients ``p_0, ..., p_n`` with ``p_n = p_{n-1} + lambda_n T'(f - T x_n)``."""

    subgradients: Tuple[np.ndarray, ...]
    update: str = "p_n = p_{n-1} + lambda_n T'(f - T x_n)"

    @property
    def last(self):
        return self.subgradients[-1]


@dataclass(frozen=True, eq=False)
class MultiscaleDecomposition:
    """Complete record of one run.

    ``penalty_values[k]`` is ``lambda_k * J_k(u_k)``: ``J(u_k)`` for the
    standard method, ``sum |u_k|^{p_k}`` for varying exponents, and the
    full composite value for the tight and Bregman variants.
    ``fidelity_inner[k]`` is ``<T'v_k, u_k>``.
    """

    variant: str
    data: np.ndarray
    operator: linops.LinearMap
    components: Tuple[np.ndarray, ...]
    partial_sums: Tuple[np.ndarray, ...]
    residual_norms: Tuple[float, ...]
    lambdas: Tuple[float, ...]
    penalty_values: Tuple[float, ...]
    fidelity_inner: Tuple[float, ...]
    penalty_labels: Tuple[str, ...]
    iterations: Tuple[int, ...]
    converged: Tuple[bool, ...]
    stop_index: Optional[int] = None
    penalty: Optional[Penalty] = None
    bregman: Optional[BregmanState] = None

    def __len__(self):
        return len(self.components)

    @property
    def final(self):
        return self.partial_sums[-1]

    @property
    def residual(self):
        return self.data - self.operator.apply(self.final)

    @property
    def all_converged(self):
        return all(self.converged)

    def residual_at(self, k):
        return self.data - self.operator.apply(self.partial_sums[k])


class _Recorder:
    def __init__(self, variant, T, f, penalty=None):
        self.variant = variant
        self.T = T
        self.f = f
        self.penalty = penalty
        self.x = np.zeros(T.cols)
        self.v = f.copy()
        self.rows = {k: [] for k in (
            "components", "partial_sums", "residual_norms", "lambdas", "penalty_values",
            "fidelity_inner", "penalty_labels", "iterations", "converged")}
        self.subgradients = None
        self.stop_index = None

    def push(self, u, lam, pen_value, label, result):
        if not np.all(np.isfinite(u)):
            raise SolverFailure(f"non-finite component at step {len(self)}", self.build())
        self.x = self.x + u
        self.v = self.f - self.T.apply(self.x)
        r = self.rows
        r["components"].append(_frozen(u))
        r["partial_sums"].append(_frozen(self.x))
        r["residual_norms"].append(float(np.linalg.norm(self.v)))
        r["lambdas"].append(float(lam))
        r["penalty_values"].append(float(pen_value))
        r["fidelity_inner"].append(float(np.dot(self.T.adjoint(self.v), u)))
        r["penalty_labels"].append(label)
        r["iterations"].append(int(result.iterations))
        r["converged"].append(bool(result.converged))

    def __len__(self):
        return len(self.rows["components"])

    def build(self):
        r = self.rows
        breg = None
        if self.subgradients is not None:
            breg = BregmanState(tuple(_frozen(p) for p in self.subgradients))
        return MultiscaleDecomposition(
            variant=self.variant, data=_frozen(self.f), operator=self.T,
            components=tuple(r["components"]), partial_sums=tuple(r["partial_sums"]),
            residual_norms=tuple(r["residual_norms"]), lambdas=tuple(r["lambdas"]),
            penalty_values=tuple(r["penalty_values"]), fidelity_inner=tuple(r["fidelity_inner"]),
            penalty_labels=tuple(r["penalty_labels"]), iterations=tuple(r["iterations"]),
            converged=tuple(r["converged"]), stop_index=self.stop_index,
            penalty=self.penalty, bregman=breg,
        )


def _drive(rec, stop, lambdas, step):
    """Run ``step(n, lam)`` until the stopping rule fires.

    ``step`` returns ``(u, penalty_value, label, result)``. Numerical
    failures in the inner solver abort with the partial record attached.
    """
    if lambdas.length is not None and lambdas.length < stop.count and stop.kind == "fixed":
        raise ValueError(f"schedule has {lambdas.length} entries, {stop.count} steps requested")
    for n in range(stop.count):
        if lambdas.length is not None and n >= lambdas.length:
            break
        lam = lambdas.value(n)
        try:
            u, pen, label, result = step(n, lam)
        except (NumericalFailure, FloatingPointError, np.linalg.LinAlgError) as exc:
            raise SolverFailure(f"inner solve failed at step {n}: {exc}", rec.build()) from exc
        rec.push(u, lam, pen, label, result)
        if stop.reached(rec.rows["residual_norms"][-1]):
            rec.stop_index = n
            break
    return rec.build()


def _prepare(T, f):
    f = linops.as_signal(f)
    if f.size != T.rows:
        raise ValueError(f"data has length {f.size}, operator has {T.rows} rows")
    return f


# ---------------------------------------------------------------- variants


def run_mhdm(J, T, f, schedule, stop, opts=DEFAULT_OPTIONS):
    """Standard MHDM: ``u_n`` minimizes ``(lambda_n/2)||v_{n-1} - Tu||^2 + J(u)``.

    Every inner solve starts from 0.

    Raises
    ------
    SolverFailure
        If an inner solve fails; ``partial`` holds the steps completed.
    """
    f = _prepare(T, f)
    opts = opts.with_warm_start(None)
    rec = _Recorder("mhdm", T, f, J)

    def step(n, lam):
        res = solvers.solve_subproblem(J, T, rec.v, lam, opts)
        u = res.minimizer
        return u, penalties.evaluate(J, u), str(J), res

    return _drive(rec, stop, schedule, step)


def run_flexible(schedule, T, f, stop, opts=DEFAULT_OPTIONS):
    """Flexible MHDM driven by a penalty schedule ``J_n``.

    Constant schedules reproduce :func:`run_mhdm`; varying-exponent
    schedules use ``Lp(p_n)`` at step ``n``. Tight and Bregman schedules
    are forwarded to their engines.
    """
    if isinstance(schedule, TightSchedule):
        return run_tight(schedule.penalty, T, f, schedule.lambdas, schedule.a_seq, stop, opts)
    if isinstance(schedule, BregmanSchedule):
        return run_bregman(schedule.penalty, T, f, schedule.lambdas, stop, opts)
    if isinstance(schedule, ConstantSchedule):
        out = run_mhdm(schedule.penalty, T, f, schedule.lambdas, stop, opts)
        return _retag(out, "flexible")
    if not isinstance(schedule, VaryingExponentSchedule):
        raise TypeError(f"unsupported schedule {schedule!r}")
    f = _prepare(T, f)
    opts = opts.with_warm_start(None)
    rec = _Recorder("flexible", T, f)

    def step(n, lam):
        Jn = schedule.penalty_at(n)
        res = solvers.solve_subproblem(Jn, T, rec.v, lam, opts)
        u = res.minimizer
        return u, penalties.evaluate(Jn, u), str(Jn), res

    return _drive(rec, stop, schedule.lambdas, step)


def _retag(decomp, variant):
    return MultiscaleDecomposition(**{**decomp.__dict__, "variant": variant})


def _tight_quadratic(T, v, lam, a, shift):
    # (lam T'T + (lam a + 1) I) u = lam T'v - lam a shift
    rhs = lam * T.adjoint(v) - lam * a * shift
    if T.is_identity:
        return rhs / (lam + lam * a + 1.0)
    lhs = lam * T.gram + (lam * a + 1.0) * np.eye(T.cols)
    return sla.cho_solve(sla.cho_factor(lhs), rhs)


def run_tight(J, T, f, schedule, a_seq, stop, opts=DEFAULT_OPTIONS):
    """Tight MHDM: ``u_n`` minimizes
    ``(lambda_n/2)||T(u + x_{n-1}) - f||^2 + lambda_n a_n J(u + x_{n-1}) + J(u)``.

    Supported penalties are ``l1`` (any operator) and ``quadratic``.
    ``a_seq`` is a sequence, a callable ``n -> a_n`` or the string
    ``"inverse-lambda"`` for ``a_n = 1/lambda_n``.
    """
    if J.kind not in ("l1", "quadratic"):
        raise UnsupportedCombination(f"tight MHDM supports l1 and quadratic, not {J.kind}")
    if isinstance(a_seq, str):
        if a_seq != "inverse-lambda":
            raise ValueError(f"unknown a_n preset {a_seq!r}")
        a_seq = inverse_lambda_weights(schedule)
    sched = TightSchedule(J, schedule, a_seq)
    f = _prepare(T, f)
    opts = opts.with_warm_start(None)
    rec = _Recorder("tight", T, f, J)

    def step(n, lam):
        a = sched.a(n)
        if a < 0:
            raise ValueError(f"a_{n} = {a} is negative")
        shift = rec.x.copy()
        if J.kind == "l1":
            res = solvers.solve_l1_tight(T, rec.v, lam, a, shift, opts)
            u = res.minimizer
        else:
            u = _tight_quadratic(T, rec.v, lam, a, shift)
            res = solvers.SubproblemResult(u, math.nan, 1, True, lam * T.adjoint(rec.v - T.apply(u)))
        pen = lam * a * penalties.evaluate(J, u + shift) + penalties.evaluate(J, u)
        return u, pen, f"tight({J}, a={a:g})", res

    return _drive(rec, stop, schedule, step)


def run_bregman(J, T, f, schedule, stop, opts=DEFAULT_OPTIONS):
    """Bregman iteration as a flexible MHDM with
    ``J_n(u) = (J(x_{n-1} + u) - <p_{n-1}, u>) / lambda_n``.

    Supported penalties are ``l1`` and ``quadratic``; the subgradients
    ``p_n`` are stored in ``decomp.bregman``.
    """
    if J.kind not in ("l1", "quadratic"):
        raise UnsupportedCombination(f"Bregman iteration supports l1 and quadratic, not {J.kind}")
    f = _prepare(T, f)
    opts = opts.with_warm_start(None)
    rec = _Recorder("bregman", T, f, J)
    rec.subgradients = []
    p = np.zeros(T.cols)

    def step(n, lam):
        nonlocal p
        x_prev = rec.x
        if J.kind == "l1":
            res = solvers.solve_l1_tilted(T, f, lam, p, opts)
        else:
            res = solvers.solve_quadratic_general(T, f, lam, tilt=p)
        u = res.minimizer - x_prev
        pen = penalties.evaluate(J, x_prev + u) - float(np.dot(p, u))
        p = p + lam * T.adjoint(f - T.apply(x_prev + u))
        rec.subgradients.append(p.copy())
        return u, pen, f"bregman({J})", res

    return _drive(rec, stop, schedule, step)


def run_iterated_tikhonov(T, f, schedule, stop):
    """Nonstationary iterated Tikhonov,
    ``x_n = argmin lambda_n ||Tx - f||^2 + ||x - x_{n-1}||^2``.

    Each step is an exact dense solve. The Bregman state holds
    ``p_n = x_n``, the quadratic-penalty subgradients.
    """
    f = _prepare(T, f)
    rec = _Recorder("iterated-tikhonov", T, f, penalties.Quadratic())
    rec.subgradients = []
    J = penalties.Quadratic()

    def step(n, lam):
        res = solvers.solve_quadratic_general(T, rec.v, lam)
        u = res.minimizer
        rec.subgradients.append(rec.x + u)
        return u, penalties.evaluate(J, u), "quadratic", res

    return _drive(rec, stop, schedule, step)
