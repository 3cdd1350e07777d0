"""Penalty functionals and per-iteration penalty schedules."""

from dataclasses import dataclass
import math
from typing import Callable, Optional, Sequence, Union

import numpy as np

__all__ = [
    "Penalty",
    "L1",
    "Lp",
    "TV1D",
    "Quadratic",
    "Entropy",
    "evaluate",
    "triangle_constant",
    "parse_penalty",
    "ConstantSchedule",
    "VaryingExponentSchedule",
    "TightSchedule",
    "BregmanSchedule",
    "increasing_exponents",
    "decreasing_exponents",
]

KINDS = ("l1", "lp", "tv1d", "quadratic", "entropy")


@dataclass(frozen=True)
class Penalty:
    """A penalty functional ``J``.

    ``p`` is used by ``lp`` only, ``weight`` by ``tv1d`` (``None`` means the
    grid spacing ``1/n``), ``spacing`` by ``entropy`` (``None`` likewise).
    """

    kind: str
    p: Optional[float] = None
    weight: Optional[float] = None
    spacing: Optional[float] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown penalty kind {self.kind!r}")
        if self.kind == "lp" and not (self.p is not None and 0 < self.p < 1):
            raise ValueError("lp penalty needs 0 < p < 1")
        if self.weight is not None and not self.weight > 0:
            raise ValueError("tv weight must be positive")
        if self.spacing is not None and not self.spacing > 0:
            raise ValueError("spacing must be positive")

    @property
    def is_seminorm(self):
        return self.kind in ("l1", "tv1d")

    @property
    def is_convex(self):
        return self.kind != "lp"

    def tv_weight(self, n):
        return self.weight if self.weight is not None else 1.0 / n

    def __call__(self, x):
        return evaluate(self, x)

    def to_spec(self):
        """Compact text form accepted by :func:`parse_penalty`."""
        if self.kind == "lp":
            return f"lp:{self.p!r}"
        if self.kind == "tv1d" and self.weight is not None:
            return f"tv1d:{self.weight!r}"
        if self.kind == "entropy" and self.spacing is not None:
            return f"entropy:{self.spacing!r}"
        return self.kind

    def __str__(self):
        if self.kind == "lp":
            return f"lp(p={self.p:g})"
        if self.kind == "tv1d" and self.weight is not None:
            return f"tv1d(w={self.weight:g})"
        return self.kind


def L1():
    return Penalty("l1")


def Lp(p):
    if p == 1:
        return L1()
    return Penalty("lp", p=float(p))


def TV1D(weight=None):
    return Penalty("tv1d", weight=None if weight is None else float(weight))


def Quadratic():
    return Penalty("quadratic")


def Entropy(spacing=None):
    return Penalty("entropy", spacing=None if spacing is None else float(spacing))


def evaluate(J, x):
    """Value of ``J`` at ``x``; ``inf`` for the entropy of a signal with negative entries."""
    x = np.asarray(x, dtype=np.float64)
    kind = J.kind
    if kind == "l1":
        return float(np.sum(np.abs(x)))
    if kind == "lp":
        return float(np.sum(np.abs(x) ** J.p))
    if kind == "tv1d":
        return float(J.tv_weight(x.size) * np.sum(np.abs(np.diff(x))))
    if kind == "quadratic":
        return float(0.5 * np.dot(x, x))
    # entropy with 0 log 0 = 0
    if np.any(x < 0):
        return math.inf
    h = J.spacing if J.spacing is not None else 1.0 / x.size
    pos = x[x > 0]
    return float(h * np.sum(pos * np.log(pos)))


def parse_penalty(spec):
    """Build a penalty from ``kind`` or ``kind:param`` (``lp:0.5``, ``tv1d:0.01``)."""
    kind, _, arg = str(spec).strip().partition(":")
    kind = kind.strip().lower()
    try:
        val = float(arg) if arg.strip() else None
    except ValueError:
        raise ValueError(f"bad penalty parameter in {spec!r}") from None
    if kind == "l1" and val is None:
        return L1()
    if kind == "lp":
        if val is None:
            raise ValueError("lp penalty needs an exponent, e.g. lp:0.5")
        return Lp(val)
    if kind == "tv1d":
        return TV1D(val)
    if kind == "quadratic" and val is None:
        return Quadratic()
    if kind == "entropy":
        return Entropy(val)
    raise ValueError(f"unknown penalty spec {spec!r}")


def triangle_constant(J):
    """Smallest ``C`` with ``J(x - y) <= C (J(x) + J(y))``, or ``None`` if none exists."""
    if J.kind in ("l1", "lp", "tv1d"):
        return 1.0
    if J.kind == "quadratic":
        return 2.0
    return None


def increasing_exponents(n):
    return 0.95 - 0.9 / (n + 1)


def decreasing_exponents(n):
    return 0.05 + 0.9 / (n + 1)


EXPONENT_RULES = {"increasing": increasing_exponents, "decreasing": decreasing_exponents}


@dataclass(frozen=True)
class ConstantSchedule:
    """``J_n = J / lambda_n``; reproduces the standard method."""

    penalty: Penalty
    lambdas: object
    kind = "constant"

    def penalty_at(self, n):
        return self.penalty

    def evaluate(self, n, u):
        return evaluate(self.penalty, u) / self.lambdas.value(n)


@dataclass(frozen=True)
class VaryingExponentSchedule:
    """``J_n = sum |u_i|^{p_n} / lambda_n`` with an exponent rule or list."""

    exponents: Union[Callable[[int], float], Sequence[float]]
    lambdas: object
    kind = "varying-exponent"

    def __post_init__(self):
        if not callable(self.exponents):
            ps = tuple(float(p) for p in self.exponents)
            if not ps:
                raise ValueError("exponent list is empty")
            if not all(0 < p <= 1 for p in ps):
                raise ValueError("exponents must lie in (0, 1]")
            object.__setattr__(self, "exponents", ps)

    def exponent(self, n):
        if callable(self.exponents):
            p = float(self.exponents(n))
        else:
            p = self.exponents[min(n, len(self.exponents) - 1)]
        if not 0 < p <= 1:
            raise ValueError(f"exponent p_{n} = {p} outside (0, 1]")
        return p

    def penalty_at(self, n):
        return Lp(self.exponent(n))

    def evaluate(self, n, u):
        return evaluate(self.penalty_at(n), u) / self.lambdas.value(n)


@dataclass(frozen=True)
class TightSchedule:
    """``J_n(u) = a_n J(u + x_{n-1}) + J(u) / lambda_n`` (tight variant, scaled by 1/lambda_n)."""

    penalty: Penalty
    lambdas: object
    a_seq: Union[Callable[[int], float], Sequence[float]]
    kind = "tight"

    def a(self, n):
        if callable(self.a_seq):
            return float(self.a_seq(n))
        seq = self.a_seq
        return float(seq[min(n, len(seq) - 1)])

    def evaluate(self, n, u, x_prev):
        lam = self.lambdas.value(n)
        return self.a(n) * evaluate(self.penalty, u + x_prev) + evaluate(self.penalty, u) / lam


@dataclass(frozen=True)
class BregmanSchedule:
    """``J_n(u) = (J(x_{n-1} + u) - <p_{n-1}, u>) / lambda_n``."""

    penalty: Penalty
    lambdas: object
    kind = "bregman"

    def evaluate(self, n, u, x_prev, p_prev):
        lam = self.lambdas.value(n)
        return (evaluate(self.penalty, x_prev + u) - float(np.dot(p_prev, u))) / lam
