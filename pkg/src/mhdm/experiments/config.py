"""Flat ``key = value`` experiment configuration.

Grammar (one assignment per line)::

    # comment
    key = value

Values are Python literals (numbers, quoted strings, lists, ``True``,
``None``); anything that does not parse as a literal is taken as a bare
string, so ``penalty = lp:0.5`` works without quotes. Unknown keys are
errors. See ``docs/formats.md`` for the full key list.
"""

import ast
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Optional, Tuple

from ..errors import ConfigError

__all__ = ["ExperimentConfig", "parse_config", "load_config", "dump_config"]

OPERATORS = ("identity", "gaussian", "matrix")
TRUTHS = ("tv-two-blocks", "sparse-peaks", "file")
VARIANTS = ("mhdm", "flexible", "tight", "bregman", "iterated-tikhonov")
STOPS = ("fixed", "discrepancy")
NOISES = ("none", "gaussian")
SWEEPABLE = ("delta", "lambda0", "ratio", "penalty", "exponents", "seed")


@dataclass(frozen=True)
class ExperimentConfig:
    name: str = "experiment"
    n: int = 100
    operator: str = "identity"
    operator_sigma: float = 0.1
    operator_file: Optional[str] = None
    truth: str = "tv-two-blocks"
    truth_file: Optional[str] = None
    # rescale x_true so that ||T x_true|| equals this value
    data_norm: Optional[float] = None
    penalty: str = "l1"
    variant: str = "mhdm"
    exponents: object = None
    tight_a: object = "inverse-lambda"
    lambda0: float = 1.0
    ratio: float = 2.0
    lambdas: Optional[Tuple[float, ...]] = None
    stop: str = "fixed"
    steps: int = 10
    tau: float = 1.01
    noise: str = "none"
    delta: float = 0.0
    seed: Optional[int] = None
    tikhonov_sweep: bool = False
    solver_max_iter: int = 5000
    solver_tol: float = 1e-8
    sweep: Optional[str] = None
    sweep_values: Optional[Tuple[object, ...]] = None

    def __post_init__(self):
        _check_choice("operator", self.operator, OPERATORS)
        _check_choice("truth", self.truth, TRUTHS)
        _check_choice("variant", self.variant, VARIANTS)
        _check_choice("stop", self.stop, STOPS)
        _check_choice("noise", self.noise, NOISES)
        if self.n < 3:
            raise ConfigError("n must be at least 3")
        if self.operator == "matrix" and not self.operator_file:
            raise ConfigError("operator = matrix needs operator_file")
        if self.truth == "file" and not self.truth_file:
            raise ConfigError("truth = file needs truth_file")
        if self.operator == "gaussian" and not self.operator_sigma > 0:
            raise ConfigError("operator_sigma must be positive")
        if self.steps < 1:
            raise ConfigError("steps must be at least 1")
        if self.noise == "gaussian" and self.seed is None:
            raise ConfigError("a seed is required when noise is present")
        if self.delta < 0:
            raise ConfigError("delta must be nonnegative")
        if self.stop == "discrepancy":
            if not self.tau > 1:
                raise ConfigError("tau must exceed 1")
        if self.variant == "flexible" and self.exponents is None:
            raise ConfigError("variant = flexible needs exponents (increasing, decreasing or a list)")
        if self.sweep is not None:
            _check_choice("sweep", self.sweep, SWEEPABLE)
            if not self.sweep_values:
                raise ConfigError("sweep needs a nonempty sweep_values list")
        elif self.sweep_values is not None:
            raise ConfigError("sweep_values given without sweep")
        if self.lambdas is not None:
            object.__setattr__(self, "lambdas", tuple(float(v) for v in self.lambdas))
        if self.sweep_values is not None:
            object.__setattr__(self, "sweep_values", tuple(self.sweep_values))

    def cells(self):
        """One config per sweep value (the config itself when not sweeping)."""
        if self.sweep is None:
            return [self]
        return [replace(self, sweep=None, sweep_values=None, **{self.sweep: v})
                for v in self.sweep_values]

    def with_overrides(self, **kw):
        kw = {k: v for k, v in kw.items() if v is not None}
        try:
            return replace(self, **kw)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None


def _check_choice(key, value, choices):
    if value not in choices:
        raise ConfigError(f"{key} must be one of {', '.join(choices)}; got {value!r}")


_FIELDS = {f.name: f for f in fields(ExperimentConfig)}
_INT_KEYS = {"n", "steps", "seed", "solver_max_iter"}
_FLOAT_KEYS = {"operator_sigma", "data_norm", "lambda0", "ratio", "tau", "delta", "solver_tol"}


def _coerce(key, value):
    if value is None:
        return None
    if key in _INT_KEYS:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{key} must be an integer, got {value!r}")
        return value
    if key in _FLOAT_KEYS:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{key} must be a number, got {value!r}")
        return float(value)
    if key == "tikhonov_sweep":
        if not isinstance(value, bool):
            raise ConfigError("tikhonov_sweep must be True or False")
        return value
    if key in ("lambdas", "sweep_values"):
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{key} must be a list")
        return tuple(value)
    if key in ("exponents", "tight_a"):
        return tuple(value) if isinstance(value, list) else value
    return str(value)


def parse_config(text, source="<config>"):
    """Parse configuration text into an :class:`ExperimentConfig`.

    Raises
    ------
    ConfigError
        On syntax errors, unknown or repeated keys, and invalid values.
    """
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip() if not _has_quoted_hash(raw) else raw.strip()
        if not line:
            continue
        key, sep, val = line.partition("=")
        key = key.strip()
        if not sep or not key:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        if key not in _FIELDS:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        val = val.strip()
        try:
            parsed = ast.literal_eval(val)
        except (ValueError, SyntaxError):
            parsed = val
        values[key] = _coerce(key, parsed)
    try:
        return ExperimentConfig(**values)
    except ConfigError as exc:
        raise ConfigError(f"{source}: {exc}") from None


def _has_quoted_hash(line):
    # a '#' inside quotes is part of the value
    return "#" in line and ('"' in line.split("#", 1)[0] or "'" in line.split("#", 1)[0])


def load_config(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror or exc}") from None
    return parse_config(text, str(path))


def dump_config(cfg):
    """Serialize a config back to the text format (non-default keys only)."""
    default = ExperimentConfig()
    lines = []
    for name in _FIELDS:
        v = getattr(cfg, name)
        if v == getattr(default, name) and name != "name":
            continue
        if isinstance(v, tuple):
            v = list(v)
        lines.append(f"{name} = {v!r}")
    return "\n".join(lines) + "\n"
