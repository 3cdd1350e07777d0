"""Reading and writing decompositions.

A decomposition is stored as a per-iteration CSV table plus a sidecar
``.npz`` with the vectors (components, partial sums, data, operator).
The layout is documented in ``docs/formats.md``.
"""

import csv
import json
from pathlib import Path

import numpy as np

from . import analysis, linops, penalties
from .engine import BregmanState, MultiscaleDecomposition

__all__ = [
    "DECOMP_COLUMNS",
    "fmt",
    "sidecar_path",
    "write_decomposition",
    "save_decomposition",
    "load_decomposition",
    "load_matrix_csv",
]

DECOMP_COLUMNS = (
    "n", "lambda", "residual_norm", "penalty_value", "fidelity_inner",
    "identity_residual", "penalty", "inner_iterations", "converged",
)


def fmt(x):
    """Shortest round-trip text for a float; fixed so output is byte-stable."""
    if x is None:
        return ""
    return repr(float(x))


def sidecar_path(csv_path):
    p = Path(csv_path)
    return p.with_suffix(".npz")


def write_decomposition(decomp, csv_path):
    """Write the per-iteration table only."""
    trace = analysis.identity_residual_trace(decomp)
    with open(csv_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(DECOMP_COLUMNS)
        for k in range(len(decomp)):
            w.writerow([
                k, fmt(decomp.lambdas[k]), fmt(decomp.residual_norms[k]),
                fmt(decomp.penalty_values[k]), fmt(decomp.fidelity_inner[k]), fmt(trace[k]),
                decomp.penalty_labels[k], decomp.iterations[k], int(decomp.converged[k]),
            ])


def save_decomposition(decomp, csv_path):
    """Write the CSV table and its ``.npz`` sidecar; returns both paths."""
    csv_path = Path(csv_path)
    write_decomposition(decomp, csv_path)
    npz = sidecar_path(csv_path)
    T = decomp.operator
    subgrads = (np.array(decomp.bregman.subgradients) if decomp.bregman is not None
                else np.zeros((0, T.cols)))
    np.savez(
        npz,
        variant=np.array(decomp.variant),
        data=decomp.data,
        operator_kind=np.array(T.kind),
        operator_matrix=T.matrix,
        operator_params=np.array(json.dumps(T.params, sort_keys=True)),
        components=np.array(decomp.components).reshape(len(decomp), T.cols),
        partial_sums=np.array(decomp.partial_sums).reshape(len(decomp), T.cols),
        residual_norms=np.array(decomp.residual_norms),
        lambdas=np.array(decomp.lambdas),
        penalty_values=np.array(decomp.penalty_values),
        fidelity_inner=np.array(decomp.fidelity_inner),
        penalty_labels=np.array(decomp.penalty_labels, dtype=str),
        iterations=np.array(decomp.iterations, dtype=np.int64),
        converged=np.array(decomp.converged, dtype=bool),
        stop_index=np.array(-1 if decomp.stop_index is None else decomp.stop_index),
        penalty=np.array("" if decomp.penalty is None else decomp.penalty.to_spec()),
        subgradients=subgrads,
        has_bregman=np.array(decomp.bregman is not None),
    )
    return csv_path, npz


def load_decomposition(path):
    """Load a decomposition from its CSV path or directly from the sidecar.

    Raises
    ------
    FileNotFoundError
        If the sidecar is missing.
    ValueError
        If the sidecar is malformed.
    """
    path = Path(path)
    npz = path if path.suffix == ".npz" else sidecar_path(path)
    if not npz.exists():
        raise FileNotFoundError(f"decomposition sidecar {npz} not found")
    try:
        with np.load(npz, allow_pickle=False) as z:
            T = linops.LinearMap(str(z["operator_kind"]), z["operator_matrix"],
                                 json.loads(str(z["operator_params"])))
            comps = tuple(np.array(c) for c in z["components"])
            sums = tuple(np.array(c) for c in z["partial_sums"])
            for a in comps + sums:
                a.setflags(write=False)
            spec = str(z["penalty"])
            breg = None
            if bool(z["has_bregman"]):
                breg = BregmanState(tuple(np.array(p) for p in z["subgradients"]))
            stop = int(z["stop_index"])
            data = np.array(z["data"])
            data.setflags(write=False)
            return MultiscaleDecomposition(
                variant=str(z["variant"]), data=data, operator=T,
                components=comps, partial_sums=sums,
                residual_norms=tuple(float(v) for v in z["residual_norms"]),
                lambdas=tuple(float(v) for v in z["lambdas"]),
                penalty_values=tuple(float(v) for v in z["penalty_values"]),
                fidelity_inner=tuple(float(v) for v in z["fidelity_inner"]),
                penalty_labels=tuple(str(s) for s in z["penalty_labels"]),
                iterations=tuple(int(v) for v in z["iterations"]),
                converged=tuple(bool(v) for v in z["converged"]),
                stop_index=None if stop < 0 else stop,
                penalty=penalties.parse_penalty(spec) if spec else None,
                bregman=breg,
            )
    except KeyError as exc:
        raise ValueError(f"{npz} is missing field {exc}") from None


def load_matrix_csv(path):
    """Read a dense matrix from plain comma-separated text (``#`` comments allowed)."""
    rows = []
    with open(path, newline="") as fh:
        for line in csv.reader(fh):
            if not line or line[0].lstrip().startswith("#"):
                continue
            try:
                rows.append([float(v) for v in line if v.strip() != ""])
            except ValueError:
                raise ValueError(f"non-numeric entry in {path}: {line}") from None
    if not rows or len({len(r) for r in rows}) != 1 or not rows[0]:
        raise ValueError(f"{path} does not hold a rectangular matrix")
    return np.array(rows)
