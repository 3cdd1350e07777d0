"""The ``mhdm`` command line.

Exit codes: 0 success, 1 configuration or input error, 2 solver failure,
3 a ``check`` test failed. ``cone`` exits 0 for both verdicts.
"""

import argparse
import csv
import sys
from dataclasses import replace
from pathlib import Path

from .. import analysis, io
from ..errors import ConfigError, SolverFailure
from . import presets
from .config import load_config
from .runner import SUMMARY_COLUMNS, run_experiment, summary_rows

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_SOLVER = 2
EXIT_CHECK = 3

IDENTITY_TOL = 1e-4
BREGMAN_TOL = 1e-10
CONSISTENCY_TOL = 1e-10
MONOTONE_TOL = 1e-10


class _Parser(argparse.ArgumentParser):
    # usage errors are configuration errors; argparse would exit 2
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _parser():
    p = _Parser(prog="mhdm", description="Multiscale hierarchical decompositions.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("--out-dir", type=Path, default=None,
                        help="directory for CSV artifacts (default: mhdm-out/<name>)")
        sp.add_argument("--seed", type=int, default=None, help="override the noise seed")
        sp.add_argument("--format", choices=("text", "csv"), default="text",
                        help="stdout format")

    sp = sub.add_parser("run", help="run an experiment config file")
    sp.add_argument("config")
    common(sp)
    sp = sub.add_parser("preset", help="run a named experiment")
    sp.add_argument("name")
    common(sp)
    sp = sub.add_parser("check", help="re-run the analysis checks on a stored decomposition")
    sp.add_argument("decomposition")
    sp.add_argument("--format", choices=("text", "csv"), default="text")
    sp = sub.add_parser("cone", help="positive cone test for a dense CSV matrix")
    sp.add_argument("matrix")
    sp.add_argument("--exhaustive", action="store_true", help="enumerate column subsets")
    sp.add_argument("--format", choices=("text", "csv"), default="text")
    return p


def _print_summary(result, fmt, out):
    rows = summary_rows(result)
    if fmt == "csv":
        w = csv.writer(out, lineterminator="\n")
        w.writerow(SUMMARY_COLUMNS)
        w.writerows(rows)
        return
    keep = ("cell", "value", "steps_run", "n_star_mhdm", "n_star_tikhonov",
            "rel_error_mhdm", "rel_error_tikhonov", "identity_residual")
    idx = [SUMMARY_COLUMNS.index(k) for k in keep]
    print(f"{result.config.name}: {len(rows)} cell(s)", file=out)
    print("  ".join(keep), file=out)
    for r in rows:
        print("  ".join(_short(r[i]) for i in idx), file=out)
    if result.out_dir is not None:
        print(f"artifacts written to {result.out_dir}", file=out)


def _short(v):
    try:
        return f"{float(v):.4g}" if isinstance(v, str) and v and v != "*" else str(v)
    except ValueError:
        return v


def _run(cfg, args, base):
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    out = args.out_dir if args.out_dir is not None else Path("mhdm-out") / cfg.name
    result = run_experiment(cfg, out, base)
    _print_summary(result, args.format, sys.stdout)
    return EXIT_OK


def check_decomposition(decomp):
    """Analysis checks for a stored decomposition: ``[(name, value, tol, ok)]``."""
    results = []
    worst = max(analysis.consistency_errors(decomp))
    results.append(("consistency", worst, CONSISTENCY_TOL, worst <= CONSISTENCY_TOL))
    ident = analysis.decomposition_identity_residual(decomp)
    results.append(("identity_residual", ident, IDENTITY_TOL, ident <= IDENTITY_TOL))
    if decomp.variant in ("mhdm", "flexible", "iterated-tikhonov"):
        inc = analysis.residual_increase(decomp)
        results.append(("residual_monotone", inc, MONOTONE_TOL, inc <= MONOTONE_TOL))
    if decomp.bregman is not None:
        b = analysis.bregman_decomposition_residual(decomp)
        results.append(("bregman_identity", b, BREGMAN_TOL, b <= BREGMAN_TOL))
    return results


def _check(args):
    try:
        decomp = io.load_decomposition(args.decomposition)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    results = check_decomposition(decomp)
    if args.format == "csv":
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(("check", "value", "tolerance", "pass"))
        for name, v, tol, ok in results:
            w.writerow((name, io.fmt(v), io.fmt(tol), int(ok)))
    else:
        for name, v, tol, ok in results:
            print(f"{'PASS' if ok else 'FAIL'}  {name} = {v:.3e} (tol {tol:.1e})")
    return EXIT_OK if all(r[3] for r in results) else EXIT_CHECK


def _cone(args):
    try:
        A = io.load_matrix_csv(args.matrix)
        report = analysis.positive_cone_check(A, exhaustive=args.exhaustive)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    # a NO verdict is an answer, not an error
    sys.stdout.write(report.to_csv() if args.format == "csv" else report.to_text())
    return EXIT_OK


def main(argv=None):
    args = _parser().parse_args(argv)
    try:
        if args.command == "run":
            cfg = load_config(args.config)
            return _run(cfg, args, Path(args.config).resolve().parent)
        if args.command == "preset":
            try:
                cfg = presets.load_preset(args.name)
            except KeyError as exc:
                print(f"error: {exc.args[0]}", file=sys.stderr)
                return EXIT_CONFIG
            return _run(cfg, args, None)
        if args.command == "check":
            return _check(args)
        return _cone(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverFailure as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
