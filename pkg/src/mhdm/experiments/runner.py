"""Resolve an :class:`ExperimentConfig` and run it.

Each cell of a configuration (one per sweep value) runs the chosen MHDM
variant and, when ``tikhonov_sweep`` is set, the Tikhonov minimizers at the
same parameters ``lambda_n``. Artifacts are plain CSV; the decomposition
vectors go to a ``.npz`` sidecar. CSV output depends only on the config and
seed, never on wall time.
"""

import csv
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import List, Optional

import numpy as np

from .. import analysis, engine, io, linops, penalties, solvers
from ..errors import ConfigError, SolverFailure, UnsupportedCombination
from ..io import fmt
from .config import dump_config

__all__ = [
    "make_noise",
    "make_operator",
    "make_truth",
    "grid_l2",
    "relative_error",
    "CellResult",
    "ExperimentResult",
    "run_cell",
    "run_experiment",
    "ITERATION_COLUMNS",
    "SUMMARY_COLUMNS",
    "SIGNAL_COLUMNS",
]

ITERATION_COLUMNS = (
    "n", "lambda", "penalty", "residual_norm", "tikhonov_residual_norm", "e_n",
    "rel_error_mhdm", "rel_error_tikhonov", "identity_residual", "inner_iterations", "converged",
)
SUMMARY_COLUMNS = (
    "cell", "sweep", "value", "variant", "penalty", "delta", "lambda0", "ratio", "steps_run",
    "n_star_mhdm", "n_star_tikhonov", "rel_error_mhdm", "rel_error_tikhonov", "p_at_stop",
    "identity_residual", "all_converged",
)
SIGNAL_COLUMNS = ("i", "node", "truth", "clean", "data", "mhdm", "tikhonov")

# marker for "the discrepancy principle was never met"
NOT_MET = "*"


def make_noise(clean, target_delta, seed):
    """Add seeded Gaussian noise rescaled so that ``||f_delta - f|| = target_delta``."""
    clean = linops.as_signal(clean)
    if target_delta < 0:
        raise ValueError("target_delta must be nonnegative")
    if target_delta == 0:
        return clean.copy()
    e = np.random.default_rng(seed).standard_normal(clean.size)
    return clean + (target_delta / np.linalg.norm(e)) * e


def grid_l2(x):
    """Discrete L2 norm on the unit interval, ``||x|| / sqrt(N)``."""
    x = np.asarray(x, dtype=float)
    return float(np.linalg.norm(x) / np.sqrt(x.size))


def relative_error(x, truth):
    return float(np.linalg.norm(x - truth) / np.linalg.norm(truth))


def _resolve_path(path, base):
    p = Path(path)
    return p if p.is_absolute() or base is None else Path(base) / p


def make_operator(cfg, base=None):
    if cfg.operator == "identity":
        return linops.identity(cfg.n)
    if cfg.operator == "gaussian":
        return linops.make_gaussian_conv(cfg.n, cfg.operator_sigma)
    path = _resolve_path(cfg.operator_file, base)
    try:
        A = io.load_matrix_csv(path)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot load operator matrix: {exc}") from None
    if A.shape[1] != cfg.n:
        raise ConfigError(f"operator matrix has {A.shape[1]} columns, n = {cfg.n}")
    return linops.from_matrix(A)


def _sparse_peaks(n):
    text = resources.files("mhdm.experiments").joinpath("data/sparse_peaks.csv").read_text()
    rows = [r for r in csv.reader(text.splitlines()) if r and not r[0].startswith("#")]
    x = np.zeros(n)
    for idx, amp in rows[1:]:
        i = int(idx)
        if i >= n:
            raise ConfigError(f"sparse-peaks is defined for n >= {i + 1}, got n = {n}")
        x[i] = float(amp)
    return x


def make_truth(cfg, base=None):
    if cfg.truth == "tv-two-blocks":
        t = linops.grid_nodes(cfg.n)
        return ((t >= 0.3) & (t <= 0.5)) + 0.5 * ((t >= 0.68) & (t <= 0.72))
    if cfg.truth == "sparse-peaks":
        return _sparse_peaks(cfg.n)
    path = _resolve_path(cfg.truth_file, base)
    try:
        vals = np.loadtxt(path, delimiter=",", comments="#", ndmin=1)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot load truth file: {exc}") from None
    if vals.ndim != 1 or vals.size != cfg.n:
        raise ConfigError(f"truth file must hold {cfg.n} values in one column")
    return vals.astype(float)


def _schedule(cfg):
    if cfg.lambdas is not None:
        return engine.Explicit(cfg.lambdas)
    return engine.Geometric(cfg.lambda0, cfg.ratio)


def _exponents(cfg):
    e = cfg.exponents
    if isinstance(e, str):
        if e not in penalties.EXPONENT_RULES:
            raise ConfigError(f"unknown exponent rule {e!r}; use increasing or decreasing")
        return penalties.EXPONENT_RULES[e]
    if isinstance(e, (list, tuple)):
        return tuple(float(p) for p in e)
    raise ConfigError(f"exponents must be a rule name or a list, got {e!r}")


def _penalty(cfg):
    try:
        return penalties.parse_penalty(cfg.penalty)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


@dataclass
class CellResult:
    label: str
    config: object
    truth: np.ndarray
    clean: np.ndarray
    data: np.ndarray
    decomposition: engine.MultiscaleDecomposition
    tikhonov: List[np.ndarray] = field(default_factory=list)
    tikhonov_residuals: List[float] = field(default_factory=list)
    stop_mhdm: Optional[int] = None
    stop_tikhonov: Optional[int] = None
    p_at_stop: Optional[float] = None
    identity_residual: float = 0.0

    @property
    def mhdm_estimate(self):
        k = self.stop_mhdm if self.stop_mhdm is not None else len(self.decomposition) - 1
        return self.decomposition.partial_sums[k]

    @property
    def tikhonov_estimate(self):
        if self.stop_tikhonov is None:
            return None
        return self.tikhonov[self.stop_tikhonov]

    @property
    def rel_error_mhdm(self):
        return relative_error(self.mhdm_estimate, self.truth)

    @property
    def rel_error_tikhonov(self):
        x = self.tikhonov_estimate
        return None if x is None else relative_error(x, self.truth)

    def e_n(self, k):
        """Grid-L2 distance between the MHDM iterate and the Tikhonov minimizer at ``lambda_k``."""
        return grid_l2(self.decomposition.partial_sums[k] - self.tikhonov[k])


@dataclass
class ExperimentResult:
    config: object
    cells: List[CellResult]
    out_dir: Optional[Path] = None
    files: List[Path] = field(default_factory=list)


def _tikhonov_penalty(cfg, J, schedule_rule, n):
    if cfg.variant == "flexible":
        return penalties.Lp(schedule_rule.exponent(n))
    if cfg.variant == "iterated-tikhonov":
        return penalties.Quadratic()
    return J


def run_cell(cfg, label="cell", base=None):
    """Run one configuration cell (no sweep) and return its :class:`CellResult`.

    Raises
    ------
    ConfigError
        If the operator, truth, penalty or variant cannot be resolved.
    SolverFailure
        If the engine aborts; ``partial`` carries the steps completed.
    """
    if cfg.sweep is not None:
        raise ConfigError("run_cell expects a single cell; use run_experiment for sweeps")
    T = make_operator(cfg, base)
    truth = make_truth(cfg, base)
    if cfg.data_norm is not None:
        truth = truth * (cfg.data_norm / np.linalg.norm(T.apply(truth)))
    clean = T.apply(truth)
    data = make_noise(clean, cfg.delta, cfg.seed) if cfg.noise == "gaussian" else clean.copy()
    J = _penalty(cfg)
    lambdas = _schedule(cfg)
    if cfg.stop == "fixed":
        stop = engine.FixedCount(cfg.steps)
    else:
        stop = engine.Discrepancy(cfg.delta, cfg.tau, cfg.steps)
    opts = solvers.SolveOptions(cfg.solver_max_iter, cfg.solver_tol)

    rule = None
    try:
        if cfg.variant == "mhdm":
            decomp = engine.run_mhdm(J, T, data, lambdas, stop, opts)
        elif cfg.variant == "flexible":
            rule = penalties.VaryingExponentSchedule(_exponents(cfg), lambdas)
            decomp = engine.run_flexible(rule, T, data, stop, opts)
        elif cfg.variant == "tight":
            a = cfg.tight_a
            if isinstance(a, (int, float)):
                a = [float(a)]
            decomp = engine.run_tight(J, T, data, lambdas, a, stop, opts)
        elif cfg.variant == "bregman":
            decomp = engine.run_bregman(J, T, data, lambdas, stop, opts)
        else:
            decomp = engine.run_iterated_tikhonov(T, data, lambdas, stop)
    except (UnsupportedCombination, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from None

    cell = CellResult(label, cfg, truth, clean, data, decomp)
    cell.identity_residual = analysis.decomposition_identity_residual(decomp)
    if cfg.stop == "discrepancy":
        cell.stop_mhdm = decomp.stop_index
    if rule is not None:
        k = cell.stop_mhdm if cell.stop_mhdm is not None else len(decomp) - 1
        cell.p_at_stop = rule.exponent(k)

    if cfg.tikhonov_sweep:
        # same parameters; for discrepancy runs continue until the principle is met or the cap
        count = len(decomp) if cfg.stop == "fixed" else cfg.steps
        for k in range(count):
            if lambdas.length is not None and k >= lambdas.length:
                break
            Jk = _tikhonov_penalty(cfg, J, rule, k)
            res = solvers.solve_subproblem(Jk, T, data, lambdas.value(k), opts)
            x = res.minimizer
            cell.tikhonov.append(x)
            r = float(np.linalg.norm(data - T.apply(x)))
            cell.tikhonov_residuals.append(r)
            if cfg.stop == "discrepancy" and r * r < cfg.tau * cfg.delta**2:
                if cell.stop_tikhonov is None:
                    cell.stop_tikhonov = k
                if k >= len(decomp) - 1:
                    break
    return cell


def _cell_dir(out_dir, cfg, index):
    return out_dir if cfg.sweep is None else out_dir / f"cell-{index:02d}"


def _write_iterations(cell, path):
    d = cell.decomposition
    trace = analysis.identity_residual_trace(d)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ITERATION_COLUMNS)
        for k in range(len(d)):
            has_t = k < len(cell.tikhonov)
            w.writerow([
                k, fmt(d.lambdas[k]), d.penalty_labels[k], fmt(d.residual_norms[k]),
                fmt(cell.tikhonov_residuals[k]) if has_t else "",
                fmt(cell.e_n(k)) if has_t else "",
                fmt(relative_error(d.partial_sums[k], cell.truth)),
                fmt(relative_error(cell.tikhonov[k], cell.truth)) if has_t else "",
                fmt(trace[k]), d.iterations[k], int(d.converged[k]),
            ])


def _write_signals(cell, path):
    nodes = linops.grid_nodes(cell.truth.size)
    xt = cell.tikhonov_estimate
    if xt is None and cell.tikhonov and cell.config.stop == "fixed":
        xt = cell.tikhonov[-1]
    xm = cell.mhdm_estimate
    m = cell.data.size
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SIGNAL_COLUMNS)
        for i in range(max(cell.truth.size, m)):
            w.writerow([
                i,
                fmt(nodes[i]) if i < nodes.size else "",
                fmt(cell.truth[i]) if i < cell.truth.size else "",
                fmt(cell.clean[i]) if i < m else "",
                fmt(cell.data[i]) if i < m else "",
                fmt(xm[i]) if i < xm.size else "",
                fmt(xt[i]) if xt is not None and i < xt.size else "",
            ])


def _summary_row(index, cell, sweep, value):
    c = cell.config
    discrepancy = c.stop == "discrepancy"
    star_m = cell.stop_mhdm if cell.stop_mhdm is not None else (NOT_MET if discrepancy else "")
    if not c.tikhonov_sweep:
        star_t, rel_t = "", ""
    elif cell.stop_tikhonov is None:
        star_t, rel_t = (NOT_MET, NOT_MET) if discrepancy else ("", "")
    else:
        star_t, rel_t = cell.stop_tikhonov, fmt(cell.rel_error_tikhonov)
    return [
        index, sweep or "", "" if value is None else value, c.variant, c.penalty,
        fmt(c.delta), fmt(c.lambda0), fmt(c.ratio), len(cell.decomposition),
        star_m, star_t, fmt(cell.rel_error_mhdm), rel_t,
        fmt(cell.p_at_stop) if cell.p_at_stop is not None else "",
        fmt(cell.identity_residual), int(cell.decomposition.all_converged),
    ]


def run_experiment(cfg, out_dir=None, base=None):
    """Run every cell of ``cfg`` and write artifacts under ``out_dir``.

    Files written (per cell directory ``cell-NN`` when sweeping):
    ``iterations.csv``, ``signals.csv``, ``decomposition.csv`` with its
    ``.npz`` sidecar; plus ``summary.csv`` and ``config.txt`` at the top.
    ``base`` resolves relative file paths in the config.

    Raises
    ------
    ConfigError
        On resolution failures.
    SolverFailure
        If a cell aborts. The partial decomposition of that cell is written
        before the exception propagates.
    """
    out = None if out_dir is None else Path(out_dir)
    result = ExperimentResult(cfg, [], out)
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        (out / "config.txt").write_text(dump_config(cfg))
        result.files.append(out / "config.txt")
    cells = cfg.cells()
    values = cfg.sweep_values or (None,)
    rows = []
    for i, (c, v) in enumerate(zip(cells, values)):
        label = cfg.name if cfg.sweep is None else f"{cfg.name}[{cfg.sweep}={v}]"
        cdir = None if out is None else _cell_dir(out, cfg, i)
        try:
            cell = run_cell(c, label, base)
        except SolverFailure as exc:
            if cdir is not None and exc.partial is not None and len(exc.partial):
                cdir.mkdir(parents=True, exist_ok=True)
                io.save_decomposition(exc.partial, cdir / "decomposition-partial.csv")
            raise
        result.cells.append(cell)
        rows.append(_summary_row(i, cell, cfg.sweep, v))
        if cdir is not None:
            cdir.mkdir(parents=True, exist_ok=True)
            _write_iterations(cell, cdir / "iterations.csv")
            _write_signals(cell, cdir / "signals.csv")
            csv_p, npz_p = io.save_decomposition(cell.decomposition, cdir / "decomposition.csv")
            result.files += [cdir / "iterations.csv", cdir / "signals.csv", csv_p, npz_p]
    if out is not None:
        with open(out / "summary.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(SUMMARY_COLUMNS)
            w.writerows(rows)
        result.files.append(out / "summary.csv")
    return result


def summary_rows(result):
    """Summary rows (as written to ``summary.csv``) for an in-memory result."""
    cfg = result.config
    values = cfg.sweep_values or (None,)
    return [_summary_row(i, c, cfg.sweep, v) for i, (c, v) in enumerate(zip(result.cells, values))]
