"""Grid-search benchmark over datasets, methods and kernel modes.

Every grid point is fitted independently and scored against ground truth.
Each method is reported by its best grid point (highest AC, ties broken by
higher MI and then by the smallest parameter tuple); kmeans is reported as
mean and standard deviation over seeded repetitions instead. Finished
points are appended to a journal so an interrupted sweep can resume.
"""
from __future__ import annotations

import csv
import os
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from . import baselines, cluster
from .data import Dataset, load_csv, nng_init, random_init, read_labels, standardize
from .metrics import ReportRow, aligned_table, nmi, rand_accuracy, report_csv
from .ramp import HyperParams
from .solver import SolverOptions

METHODS = ("kmeans", "kpc", "ppc", "ramptwsvc")
MODES = ("linear", "kernel")
EXTERNAL_METHODS = ("twsvc", "rtwsvc", "frtwsvc")
TABLE_COLUMNS = (("kmeans", "kmeans"), ("kpc", "kPC"), ("ppc", "PPC"),
                 ("twsvc", "TWSVC"), ("rtwsvc", "RTWSVC"), ("frtwsvc", "FRTWSVC"),
                 ("ramptwsvc", "Ours"))
C_POWERS = tuple(range(-8, 8))
MU_POWERS = tuple(range(-10, 6))
JOURNAL_HEADER = ("dataset", "method", "mode", "params", "seed", "ac", "mi", "seconds")
SELECTION_NOTE = ("best-over-grid by AC against ground truth (ties: higher MI, then "
                  "smallest parameters); kmeans: mean±std over seeded repetitions")


# -- grids ---------------------------------------------------------------------

@dataclass(frozen=True)
class GridPoint:
    method: str
    mode: str
    params: Tuple[Tuple[str, float], ...] = ()
    seed: Optional[int] = None

    @property
    def param_text(self) -> str:
        return ";".join(f"{k}={format(v, '.17g')}" for k, v in self.params)

    @property
    def seed_text(self) -> str:
        return "" if self.seed is None else str(self.seed)

    def key(self, dataset: str) -> Tuple[str, str, str, str, str]:
        return (dataset, self.method, self.mode, self.param_text, self.seed_text)


def powers_of_two(powers: Iterable[int]) -> List[float]:
    return [float(2.0 ** p) for p in powers]


def method_grid(method: str, mode: str, c_values: Sequence[float],
                mu_values: Sequence[float], repetitions: int = 10) -> List[GridPoint]:
    """Grid points in a fixed order; kernel grids vary ``mu`` slowest."""
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}")
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    mus = [(("mu", mu),) for mu in mu_values] if mode == "kernel" else [()]
    points = []
    for head in mus:
        if method == "ramptwsvc":
            points += [GridPoint(method, mode, head + (("c1", a), ("c2", b)))
                       for a in c_values for b in c_values]
        elif method == "ppc":
            points += [GridPoint(method, mode, head + (("c", c),)) for c in c_values]
        elif method == "kpc":
            points.append(GridPoint(method, mode, head))
        else:
            points += [GridPoint(method, mode, head, seed) for seed in range(repetitions)]
    return points


# -- single fits ---------------------------------------------------------------

@dataclass(frozen=True)
class BenchSettings:
    standardize: str = "minmax"
    init: str = "nng"
    init_seed: int = 0
    outer_max: int = 50
    kmeans_outer_max: int = 100
    delta: float = 0.3
    s: float = -0.2


@lru_cache(maxsize=4)
def _gram(dataset_key: str, mu: float, X_bytes: bytes, shape: Tuple[int, int]) -> np.ndarray:
    X = np.frombuffer(X_bytes).reshape(shape)
    return cluster.gram(X, X, mu)


def fit_point(d: Dataset, point: GridPoint, settings: BenchSettings) -> np.ndarray:
    """Fit one grid point on an already scaled dataset and return its labels."""
    k = d.k_true
    X = d.samples
    params = dict(point.params)
    features = X
    G = None
    if point.mode == "kernel":
        G = _gram(d.name, params["mu"], np.ascontiguousarray(X).tobytes(), X.shape)
        features = G
    if point.method == "kmeans":
        return baselines.kmeans_fit(features, k, point.seed,
                                    settings.kmeans_outer_max).training_meta["final_labels"]
    # initialize on the representation being clustered
    if settings.init == "nng":
        init = nng_init(features, k, settings.init_seed)
    else:
        init = random_init(features, k, settings.init_seed)
    if point.method == "kpc":
        model = baselines.kpc_fit(features, k, init, settings.outer_max)
    elif point.method == "ppc":
        model = baselines.ppc_fit(features, k, params["c"], init, settings.outer_max)
    else:
        hp = HyperParams(c1=params["c1"], c2=params["c2"], delta=settings.delta,
                         s=settings.s, mu=params.get("mu", 1.0))
        model = cluster.fit(X, k, hp, point.mode, init, SolverOptions(),
                            settings.outer_max, gram_matrix=G)
    return model.training_meta["final_labels"]


def score_point(d: Dataset, point: GridPoint, settings: BenchSettings):
    start = time.perf_counter()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        labels = fit_point(d, point, settings)
    return (rand_accuracy(d.truth_labels, labels), nmi(d.truth_labels, labels),
            time.perf_counter() - start)


# -- journal -------------------------------------------------------------------

def read_journal(path) -> Dict[tuple, Tuple[float, float]]:
    done: Dict[tuple, Tuple[float, float]] = {}
    if not path or not os.path.exists(path):
        return done
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            try:
                key = tuple(row[h] for h in JOURNAL_HEADER[:5])
                done[key] = (float(row["ac"]), float(row["mi"]))
            except (KeyError, TypeError, ValueError):
                # a line cut short by an interruption
                continue
    return done


class Journal:
    def __init__(self, path):
        self.path = path
        self._fh = None
        if path:
            fresh = not os.path.exists(path) or os.path.getsize(path) == 0
            self._fh = open(path, "a", newline="", encoding="utf-8")
            if fresh:
                self._fh.write(",".join(JOURNAL_HEADER) + "\n")
                self._fh.flush()

    def record(self, key, ac, mi, seconds):
        if self._fh is None:
            return
        csv.writer(self._fh, lineterminator="\n").writerow(
            list(key) + [repr(ac), repr(mi), f"{seconds:.3f}"])
        self._fh.flush()

    def close(self):
        if self._fh is not None:
            self._fh.close()


# -- workers -------------------------------------------------------------------

_WORKER_STATE = {}


def _init_worker(datasets, settings):
    _WORKER_STATE["datasets"] = datasets
    _WORKER_STATE["settings"] = settings


def _run_task(task):
    name, point = task
    d = _WORKER_STATE["datasets"][name]
    return task, score_point(d, point, _WORKER_STATE["settings"])


def worker_count(requested: Optional[int] = None) -> int:
    """Requested workers, capped by ``PLANECLUST_THREADS`` when it is set."""
    n = requested if requested is not None else (os.cpu_count() or 1)
    cap = os.environ.get("PLANECLUST_THREADS")
    if cap:
        try:
            n = min(n, int(cap))
        except ValueError:
            raise ValueError(f"PLANECLUST_THREADS must be an integer, got {cap!r}") from None
    return max(1, n)


# -- driver --------------------------------------------------------------------

@dataclass
class MethodResult:
    dataset: str
    method: str
    mode: str
    ac: float
    mi: float
    params: str
    ac_std: Optional[float] = None
    mi_std: Optional[float] = None
    repetitions: int = 1
    seed: Optional[int] = None

    def report_row(self) -> ReportRow:
        params = self.params
        if self.ac_std is not None:
            extra = (f"ac_std={self.ac_std:.2f};mi_std={self.mi_std:.2f};"
                     f"repetitions={self.repetitions}")
            params = f"{params};{extra}" if params else extra
        return ReportRow(self.dataset, f"{self.method}-{self.mode}", self.ac, self.mi,
                         params, self.seed)


def select_best(points: Sequence[GridPoint], scores: Sequence[Tuple[float, float]]):
    """Index of the best point: highest AC, then higher MI, then smallest parameters."""
    order = sorted(range(len(points)),
                   key=lambda j: (-scores[j][0], -scores[j][1],
                                  tuple(v for _, v in points[j].params)))
    return order[0]


def summarize(dataset: str, method: str, mode: str, points, scores) -> MethodResult:
    if method != "kmeans":
        j = select_best(points, scores)
        return MethodResult(dataset, method, mode, scores[j][0], scores[j][1],
                            points[j].param_text)
    # group repetitions by the non-seed parameters, then pick the best mean
    groups: Dict[str, List[int]] = {}
    for j, p in enumerate(points):
        groups.setdefault(p.param_text, []).append(j)
    best = None
    for text, idx in groups.items():
        ac = np.array([scores[j][0] for j in idx])
        mi = np.array([scores[j][1] for j in idx])
        cand = MethodResult(dataset, method, mode, float(ac.mean()), float(mi.mean()),
                            text, float(ac.std()), float(mi.std()), len(idx))
        params = tuple(v for _, v in points[idx[0]].params)
        rank = (-cand.ac, -cand.mi, params)
        if best is None or rank < best[0]:
            best = (rank, cand)
    return best[1]


def external_result(dataset: Dataset, method: str, mode: str, directory) -> Optional[MethodResult]:
    """Score labels produced elsewhere, read from ``<dataset>_<method>_<mode>.csv``."""
    if not directory:
        return None
    path = os.path.join(directory, f"{dataset.name}_{method}_{mode}.csv")
    if not os.path.exists(path):
        return None
    labels = read_labels(path)
    return MethodResult(dataset.name, method, mode, rand_accuracy(dataset.truth_labels, labels),
                        nmi(dataset.truth_labels, labels), f"file={os.path.basename(path)}")


def run_bench(datasets: Sequence[Dataset], methods: Sequence[str] = METHODS,
              modes: Sequence[str] = MODES, c_values: Optional[Sequence[float]] = None,
              mu_values: Optional[Sequence[float]] = None, repetitions: int = 10,
              settings: Optional[BenchSettings] = None, journal_path=None,
              workers: Optional[int] = None, external_dir=None,
              progress=None) -> List[MethodResult]:
    """Sweep every (dataset, method, mode) grid and summarize each one.

    ``datasets`` must carry truth labels and be unscaled; scaling follows
    ``settings.standardize``. Results come back in input order regardless
    of the number of workers.
    """
    settings = settings or BenchSettings()
    c_values = list(c_values) if c_values is not None else powers_of_two(C_POWERS)
    mu_values = list(mu_values) if mu_values is not None else powers_of_two(MU_POWERS)
    scaled = {}
    for d in datasets:
        if d.truth_labels is None:
            raise ValueError(f"dataset {d.name!r} has no truth labels; bench needs them")
        if d.name in scaled:
            raise ValueError(f"duplicate dataset name {d.name!r}")
        scaled[d.name] = standardize(d, settings.standardize)

    plan = []
    for d in datasets:
        for mode in modes:
            for method in methods:
                plan.append((d.name, method, mode,
                             method_grid(method, mode, c_values, mu_values, repetitions)))

    done = read_journal(journal_path)
    todo = [(name, p) for name, _, _, pts in plan for p in pts if p.key(name) not in done]
    journal = Journal(journal_path)
    total = sum(len(pts) for *_, pts in plan)
    finished = total - len(todo)
    try:
        n_workers = worker_count(workers)
        if n_workers == 1 or len(todo) < 2:
            _init_worker(scaled, settings)
            results = map(_run_task, todo)
            pool = None
        else:
            pool = ProcessPoolExecutor(n_workers, initializer=_init_worker,
                                       initargs=(scaled, settings))
            results = pool.map(_run_task, todo, chunksize=8)
        try:
            for (name, point), (ac, mi, secs) in results:
                done[point.key(name)] = (ac, mi)
                journal.record(point.key(name), ac, mi, secs)
                finished += 1
                if progress is not None:
                    progress(finished, total, name, point)
        finally:
            if pool is not None:
                pool.shutdown(cancel_futures=True)
    finally:
        journal.close()

    summary = []
    for name, method, mode, pts in plan:
        scores = [done[p.key(name)] for p in pts]
        summary.append(summarize(name, method, mode, pts, scores))
    if external_dir:
        for d in datasets:
            for mode in modes:
                for method in EXTERNAL_METHODS:
                    r = external_result(d, method, mode, external_dir)
                    if r is not None:
                        summary.append(r)
    return summary


# -- output --------------------------------------------------------------------

def results_csv(results: Sequence[MethodResult], out=None) -> str:
    return report_csv([r.report_row() for r in results], out)


def _cell(r: Optional[MethodResult], which: str) -> str:
    if r is None:
        return "-"
    value = getattr(r, which)
    std = getattr(r, f"{which}_std")
    return f"{value:.2f}" if std is None else f"{value:.2f}±{std:.2f}"


def results_table(results: Sequence[MethodResult], mode: str) -> str:
    """Two lines per dataset (AC, then MI) with one column per method."""
    by_key = {(r.dataset, r.method): r for r in results if r.mode == mode}
    names = list(dict.fromkeys(r.dataset for r in results if r.mode == mode))
    header = ["data", "metric"] + [label for _, label in TABLE_COLUMNS]
    rows = []
    for name in names:
        for which, label in (("ac", "AC(%)"), ("mi", "MI(%)")):
            rows.append([name if which == "ac" else "", label]
                        + [_cell(by_key.get((name, m)), which) for m, _ in TABLE_COLUMNS])
    title = "linear methods" if mode == "linear" else "nonlinear methods (Gaussian kernel)"
    return f"# {title}\n# selection: {SELECTION_NOTE}\n" + aligned_table(header, rows)


def bundled_dataset_paths() -> List[str]:
    """Paths of the CSV fixtures shipped with the package, sorted by name."""
    root = resources.files("planeclust") / "datasets"
    return sorted(str(p) for p in root.iterdir() if p.name.endswith(".csv"))


def load_bundled(name: str) -> Dataset:
    """Load a shipped fixture by stem (``'iris'``, ``'wine'``, ...)."""
    for path in bundled_dataset_paths():
        if os.path.splitext(os.path.basename(path))[0] == name:
            return load_csv(path, label_column=-1)
    raise FileNotFoundError(f"no bundled dataset named {name!r}")
