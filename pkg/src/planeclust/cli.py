"""Command-line interface: ``planeclust {cluster,eval,bench,losscurve}``.

Exit codes: 0 success, 1 runtime failure, 2 invalid configuration.
Every subcommand accepts ``--config FILE`` with ``key=value`` lines named
after the long flags; flags given on the command line win.
"""
from __future__ import annotations

import argparse
import os
import sys
import time
import warnings
from typing import Dict, List, Optional

import numpy as np

from . import baselines, bench, cluster
from .data import (DataFormatError, Dataset, load_csv, nng_init, random_init, read_labels,
                   standardize, write_labels)
from .metrics import MetricReport, ReportRow, report_csv, report_table
from .ramp import HyperParams, default_grid, export_loss_curves
from .solver import SolverOptions

EXIT_OK, EXIT_RUNTIME, EXIT_CONFIG = 0, 1, 2
TRUTH_COLUMN_NAMES = ("class", "label", "labels", "target", "y")


class ConfigError(Exception):
    """Invalid configuration; maps to exit code 2."""


class StageError(Exception):
    """Runtime failure inside a named stage; maps to exit code 1."""

    def __init__(self, stage: str, error: BaseException):
        super().__init__(f"{stage}: {error}")
        self.stage = stage


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


# -- config files ----------------------------------------------------------------

def read_config(path: str) -> Dict[str, str]:
    """Parse ``key=value`` lines; ``#`` starts a comment, dashes equal underscores."""
    values = {}
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path!r}: {exc}") from None
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        values[key.replace("-", "_")] = value
    return values


def _config_path(argv: List[str]) -> Optional[str]:
    for j, tok in enumerate(argv):
        if tok == "--config" and j + 1 < len(argv):
            return argv[j + 1]
        if tok.startswith("--config="):
            return tok.split("=", 1)[1]
    return None


def _apply_config(parser: argparse.ArgumentParser, subparsers: Dict[str, argparse.ArgumentParser],
                  argv: List[str]) -> argparse.Namespace:
    path = _config_path(argv)
    command = next((tok for tok in argv if tok in subparsers), None)
    if path and command:
        sub = subparsers[command]
        known = {a.dest: a for a in sub._actions}
        defaults = {}
        for key, text in read_config(path).items():
            if key not in known or key in ("help", "config"):
                raise ConfigError(f"unknown config key {key!r} for '{command}'")
            action = known[key]
            try:
                if isinstance(action, argparse._StoreTrueAction):
                    value = text.lower() in ("1", "true", "yes", "on")
                elif isinstance(action, argparse._AppendAction):
                    value = [v.strip() for v in text.split(",") if v.strip()]
                else:
                    value = action.type(text) if action.type else text
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"config key {key!r}: {exc}") from None
            if action.choices is not None and value not in action.choices:
                raise ConfigError(f"config key {key!r}: {value!r} not in {sorted(action.choices)}")
            defaults[key] = value
            action.required = False
        sub.set_defaults(**defaults)
    return parser.parse_args(argv)


# -- shared helpers --------------------------------------------------------------

def _load_dataset(path: str, label_column: Optional[str], has_labels: bool) -> Dataset:
    """Load a CSV; the truth column is explicit, the last column, or found by name."""
    if label_column is None and has_labels:
        label_column = "-1"
    if label_column is None:
        with open(path, encoding="utf-8") as fh:
            first = fh.readline().strip().split(",")
        lowered = [f.strip().lower() for f in first]
        for name in TRUTH_COLUMN_NAMES:
            if name in lowered:
                label_column = first[lowered.index(name)].strip()
                break
    return load_csv(path, label_column=label_column)


def _hyperparams(args) -> HyperParams:
    try:
        return HyperParams(c1=args.c1, c2=args.c2, delta=args.delta, s=args.s,
                           mu=args.mu, c=args.c)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _solver_options(args) -> SolverOptions:
    try:
        return SolverOptions(max_iter=args.max_iter, subproblem_tol=args.tol,
                             smoothing=args.smoothing)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _stage(name, fn, *a, **kw):
    try:
        return fn(*a, **kw)
    except (ConfigError, StageError):
        raise
    except (OSError, ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        raise StageError(name, exc) from exc


def _default_out(data_path: str, suffix: str) -> str:
    stem = os.path.splitext(os.path.basename(data_path))[0]
    return f"{stem}.{suffix}"


# -- subcommands -----------------------------------------------------------------

def cmd_cluster(args) -> int:
    hp = _hyperparams(args)
    opts = _solver_options(args)
    if args.k < 1:
        raise ConfigError(f"k must be >= 1, got {args.k}")
    if args.outer_max < 1:
        raise ConfigError(f"outer-max must be >= 1, got {args.outer_max}")
    d = _stage("load", _load_dataset, args.data, args.label_column, args.has_labels)
    if args.k > d.m:
        raise ConfigError(f"k={args.k} exceeds the number of samples m={d.m}")
    d = _stage("standardize", standardize, d, args.standardize)

    kernel_fit = args.method == "ramptwsvc" and args.mode == "kernel"
    G = _stage("gram", cluster.gram, d.samples, d.samples, hp.mu) if kernel_fit else None

    def _init():
        # kernel fits start from a labeling of the Gram rows they operate on
        rep = d.samples if G is None else G
        if args.init == "nng":
            return nng_init(rep, args.k, args.seed)
        return random_init(rep, args.k, args.seed)

    traces = []

    def _collect(rnd, i, state):
        traces.append((rnd, i, state))

    start = time.perf_counter()
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        if args.method == "kmeans":
            model = _stage("fit", baselines.kmeans_fit, d, args.k, args.seed, args.outer_max)
        else:
            init = _stage("init", _init)
            if args.method == "ramptwsvc":
                model = _stage("fit", cluster.fit, d, args.k, hp, args.mode, init, opts,
                               args.outer_max, on_solve=_collect if args.trace_dir else None,
                               gram_matrix=G)
            elif args.method == "kpc":
                model = _stage("fit", baselines.kpc_fit, d, args.k, init, args.outer_max)
            else:
                model = _stage("fit", baselines.ppc_fit, d, args.k, hp.c, init, args.outer_max)
    elapsed = time.perf_counter() - start
    if args.method != "ramptwsvc" and args.mode == "kernel":
        print(f"note: mode=kernel applies only to ramptwsvc; {args.method} ran in input space",
              file=sys.stderr)

    labels = model.training_meta["final_labels"]
    labels_out = args.labels_out or _default_out(args.data, "labels.csv")
    model_out = args.model_out or _default_out(args.data, "model.txt")
    _stage("write labels", write_labels, labels, labels_out)
    _stage("write model", cluster.save_model, model, model_out)
    if args.trace_dir:
        _stage("write trace", _write_traces, traces, args.trace_dir)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)

    meta = model.training_meta
    summary = (f"method={args.method} mode={args.mode if args.method == 'ramptwsvc' else 'linear'} "
               f"k={args.k} m={d.m} objective={meta['objective']:.10g} "
               f"outer_iterations={meta['outer_iterations']} "
               f"stop={meta.get('stop_reason', 'converged')} time={elapsed:.3f}s")
    if d.truth_labels is not None:
        rep = MetricReport.from_labels(d.truth_labels, labels)
        summary += f" ac={rep.ac_percent:.2f} mi={rep.mi_percent:.2f}"
    print(summary)
    return EXIT_OK


def _write_traces(traces, directory):
    os.makedirs(directory, exist_ok=True)
    for rnd, i, state in traces:
        path = os.path.join(directory, f"round{rnd:03d}_cluster{i:03d}.csv")
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write("iter,objective,nnz_p1,nnz_p2\n")
            for it, obj, a, b in state.trace_rows():
                fh.write(f"{it},{format(obj, '.17g')},{a},{b}\n")


def cmd_eval(args) -> int:
    pred = _stage("read predictions", read_labels, args.pred)
    if args.truth.endswith(".labels.csv") or args.truth_format == "labels":
        truth = _stage("read truth", read_labels, args.truth)
    else:
        d = _stage("read truth", _load_dataset, args.truth, args.label_column, True)
        truth = d.truth_labels
    if pred.shape[0] != truth.shape[0]:
        raise StageError("eval", ValueError(
            f"prediction has {pred.shape[0]} labels but truth has {truth.shape[0]}"))
    rep = _stage("eval", MetricReport.from_labels, truth, pred)
    row = ReportRow(args.dataset or os.path.splitext(os.path.basename(args.truth))[0],
                    args.method, rep.ac_percent, rep.mi_percent)
    print(f"AC={rep.ac_percent:.2f} MI={rep.mi_percent:.2f}")
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            report_csv([row], fh)
    return EXIT_OK


def _parse_powers(text: str) -> List[float]:
    """``'-8:7'`` (inclusive range of exponents) or a comma list of exponents."""
    try:
        if ":" in text:
            lo, hi = (int(v) for v in text.split(":"))
            powers = range(lo, hi + 1)
        else:
            powers = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"bad exponent list {text!r}; use 'lo:hi' or 'a,b,c'") from None
    values = bench.powers_of_two(powers)
    if not values:
        raise ConfigError(f"empty exponent list {text!r}")
    return values


def cmd_bench(args) -> int:
    methods = args.methods or list(bench.METHODS)
    modes = args.modes or list(bench.MODES)
    for m in methods:
        if m not in bench.METHODS:
            raise ConfigError(f"unknown method {m!r}; choose from {', '.join(bench.METHODS)}")
    for m in modes:
        if m not in bench.MODES:
            raise ConfigError(f"unknown mode {m!r}; choose from {', '.join(bench.MODES)}")
    if args.repetitions < 1:
        raise ConfigError("repetitions must be >= 1")
    if args.workers is not None and args.workers < 1:
        raise ConfigError("workers must be >= 1")
    c_values = _parse_powers(args.c_powers)
    mu_values = _parse_powers(args.mu_powers)
    paths = args.data or bench.bundled_dataset_paths()
    datasets = [_stage("load", _load_dataset, p, args.label_column, True) for p in paths]
    settings = bench.BenchSettings(standardize=args.standardize, init=args.init,
                                   init_seed=args.seed, outer_max=args.outer_max)

    def progress(done, total, name, point):
        if args.verbose:
            print(f"[{done}/{total}] {name} {point.method}-{point.mode} "
                  f"{point.param_text} {point.seed_text}", file=sys.stderr)

    results = _stage("bench", bench.run_bench, datasets, methods, modes, c_values, mu_values,
                     args.repetitions, settings, args.journal, args.workers,
                     args.external_dir, progress)
    text = "\n".join(bench.results_table(results, mode) for mode in modes)
    print(text, end="")
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            bench.results_csv(results, fh)
    if args.table:
        with open(args.table, "w", encoding="utf-8") as fh:
            fh.write(text)
    return EXIT_OK


def cmd_losscurve(args) -> int:
    try:
        hp = HyperParams(delta=args.delta, s=args.s)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if not args.step > 0 or not args.hi >= args.lo:
        raise ConfigError("grid needs step > 0 and hi >= lo")
    grid = default_grid(args.lo, args.hi, args.step)
    if args.out:
        _stage("write", export_loss_curves, hp, grid, args.out)
    else:
        sys.stdout.write(export_loss_curves(hp, grid))
    return EXIT_OK


# -- parser ----------------------------------------------------------------------

def _add_model_flags(p):
    p.add_argument("--c1", type=float, default=1.0)
    p.add_argument("--c2", type=float, default=1.0)
    p.add_argument("--delta", type=float, default=0.3)
    p.add_argument("--s", type=float, default=-0.2)
    p.add_argument("--mu", type=float, default=1.0)
    p.add_argument("--c", type=float, default=1.0, help="PPC trade-off")


def build_parser() -> argparse.ArgumentParser:
    """The top-level parser; ``parser.subcommands`` maps names to subparsers."""
    parser = _Parser(prog="planeclust", description=__doc__.splitlines()[0])
    subs = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = subs.add_parser("cluster", help="fit one clustering and write labels and model")
    p.add_argument("--config")
    p.add_argument("--data", required=True)
    p.add_argument("--label-column", help="0-based index or header name of the truth column")
    p.add_argument("--has-labels", action="store_true",
                   help="the last column holds ground truth")
    p.add_argument("--method", choices=bench.METHODS, default="ramptwsvc")
    p.add_argument("--mode", choices=bench.MODES, default="linear")
    p.add_argument("--k", type=int, required=True)
    _add_model_flags(p)
    p.add_argument("--init", choices=("nng", "random"), default="nng")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--standardize", choices=("minmax", "zscore", "none"), default="minmax")
    p.add_argument("--outer-max", type=int, default=50)
    p.add_argument("--max-iter", type=int, default=200)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--smoothing", type=float, default=1e-6)
    p.add_argument("--labels-out")
    p.add_argument("--model-out")
    p.add_argument("--trace-dir", help="write one iter,objective,nnz_p1,nnz_p2 CSV per solve")
    p.set_defaults(func=cmd_cluster)

    p = subs.add_parser("eval", help="score a label file against ground truth")
    p.add_argument("--config")
    p.add_argument("--pred", required=True)
    p.add_argument("--truth", required=True, help="label file or dataset CSV")
    p.add_argument("--truth-format", choices=("auto", "labels", "dataset"), default="auto")
    p.add_argument("--label-column")
    p.add_argument("--dataset")
    p.add_argument("--method", default="external")
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)

    p = subs.add_parser("bench", help="grid-search benchmark with best-over-grid tables")
    p.add_argument("--config")
    p.add_argument("--data", action="append", help="dataset CSV (repeatable); default: bundled")
    p.add_argument("--label-column")
    p.add_argument("--methods", action="append", help="repeatable; default: all")
    p.add_argument("--modes", action="append", help="repeatable; default: linear and kernel")
    p.add_argument("--c-powers", default="-8:7",
                   help="exponents of 2 as lo:hi or a,b,c; write --c-powers=-3:3 for negative lo")
    p.add_argument("--mu-powers", default="-10:5", help="as --c-powers, for the kernel width")
    p.add_argument("--repetitions", type=int, default=10)
    p.add_argument("--init", choices=("nng", "random"), default="nng")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--standardize", choices=("minmax", "zscore", "none"), default="minmax")
    p.add_argument("--outer-max", type=int, default=50)
    p.add_argument("--workers", type=int)
    p.add_argument("--journal", help="progress journal CSV; reused to resume")
    p.add_argument("--external-dir", help="label files <dataset>_<method>_<mode>.csv")
    p.add_argument("--out", help="results CSV")
    p.add_argument("--table", help="aligned results table")
    p.add_argument("--verbose", action="store_true")
    p.set_defaults(func=cmd_bench)

    p = subs.add_parser("losscurve", help="tabulate the cost functions on a grid")
    p.add_argument("--config")
    p.add_argument("--delta", type=float, default=0.3)
    p.add_argument("--s", type=float, default=-0.2)
    p.add_argument("--lo", type=float, default=-3.0)
    p.add_argument("--hi", type=float, default=3.0)
    p.add_argument("--step", type=float, default=0.01)
    p.add_argument("--out")
    p.set_defaults(func=cmd_losscurve)
    parser.subcommands = dict(subs.choices)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = _apply_config(parser, parser.subcommands, argv)
        return args.func(args)
    except ConfigError as exc:
        print(f"planeclust: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except StageError as exc:
        print(f"planeclust: error during {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except DataFormatError as exc:
        print(f"planeclust: error during load: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
