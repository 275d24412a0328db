"""Dataset ingestion, scaling, per-cluster splits and initial labelings.

Labels throughout the package are integer arrays with values in ``1..k``.
"""
from __future__ import annotations

import csv
import io
import os
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial.distance import cdist


class DataFormatError(ValueError):
    """Raised when a CSV file cannot be turned into a :class:`Dataset`."""


@dataclass(frozen=True)
class Dataset:
    """An ``m x n`` sample matrix with optional ground truth.

    Attributes
    ----------
    samples : ndarray of shape (m, n)
    truth_labels : ndarray of shape (m,) or None
        Integer classes in ``1..k_true``.
    feature_names : tuple of str or None
    name : str
    """

    samples: np.ndarray
    truth_labels: Optional[np.ndarray] = None
    feature_names: Optional[tuple] = None
    name: str = "dataset"
    scaling: str = "none"

    def __post_init__(self):
        X = np.array(self.samples, dtype=float)
        if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
            raise ValueError(f"samples must be a non-empty 2-D matrix, got shape {X.shape}")
        if not np.all(np.isfinite(X)):
            raise ValueError("samples contain non-finite entries")
        X.setflags(write=False)
        object.__setattr__(self, "samples", X)
        if self.truth_labels is not None:
            y = check_labels(self.truth_labels, m=X.shape[0])
            y.setflags(write=False)
            object.__setattr__(self, "truth_labels", y)
        if self.feature_names is not None:
            names = tuple(str(f) for f in self.feature_names)
            if len(names) != X.shape[1]:
                raise ValueError(
                    f"{len(names)} feature names given for {X.shape[1]} features")
            object.__setattr__(self, "feature_names", names)

    @property
    def m(self) -> int:
        return self.samples.shape[0]

    @property
    def n(self) -> int:
        return self.samples.shape[1]

    @property
    def k_true(self) -> Optional[int]:
        if self.truth_labels is None:
            return None
        return int(self.truth_labels.max())


@dataclass(frozen=True)
class ClusterSplit:
    """Augmented within/between sample matrices for one cluster.

    ``Z`` is ``(d+1) x m_i`` and ``Zhat`` is ``(d+1) x (m - m_i)``; every
    column ends with a constant 1 so that a plane ``(w, b)`` acts on a column
    ``z`` as ``z @ u`` with ``u = (w; b)``.
    """

    Z: np.ndarray
    Zhat: np.ndarray
    within_index: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=int))
    between_index: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=int))

    @property
    def m_i(self) -> int:
        return self.Z.shape[1]

    @property
    def dim(self) -> int:
        """Length of the stacked plane vector ``u``."""
        return self.Z.shape[0]


def check_labels(labels, m: Optional[int] = None, k: Optional[int] = None) -> np.ndarray:
    """Validate a labeling and return it as an ``int64`` array."""
    y = np.asarray(labels)
    if y.ndim != 1:
        raise ValueError(f"labels must be 1-D, got shape {y.shape}")
    if y.size and not np.all(np.equal(np.mod(y, 1), 0)):
        raise ValueError("labels must be integers")
    y = y.astype(np.int64)
    if m is not None and y.shape[0] != m:
        raise ValueError(f"labels have length {y.shape[0]}, expected {m}")
    if y.size and y.min() < 1:
        raise ValueError("labels must be >= 1")
    if k is not None and y.size and y.max() > k:
        raise ValueError(f"label {y.max()} exceeds cluster count {k}")
    return y


def augment(X: np.ndarray) -> np.ndarray:
    """Append a constant-1 feature to every row."""
    X = np.asarray(X, dtype=float)
    return np.hstack([X, np.ones((X.shape[0], 1))])


def _parse_float(text: str) -> Optional[float]:
    try:
        value = float(text)
    except ValueError:
        return None
    return value


def _code_labels(tokens) -> np.ndarray:
    """Dense ``1..k`` codes by first appearance; ``2`` and ``2.0`` are the same label."""
    codes: dict = {}
    out = np.empty(len(tokens), dtype=np.int64)
    for i, tok in enumerate(tokens):
        key = str(tok).strip()
        number = _parse_float(key)
        if number is not None and float(number).is_integer():
            key = str(int(number))
        out[i] = codes.setdefault(key, len(codes) + 1)
    return out


def load_csv(path: Union[str, os.PathLike, io.TextIOBase],
             label_column: Union[int, str, None] = None,
             name: Optional[str] = None) -> Dataset:
    """Read a comma-separated file into a :class:`Dataset`.

    A header row is assumed when any feature field in the first row fails to
    parse as a number; a label column picked by position is left out of that
    check, and picking it by name implies a header. ``label_column`` may be a 0-based index (negative indices
    count from the end) or a header name. Labels are coded densely as
    ``1..k`` in order of first appearance.
    """
    if isinstance(path, (str, os.PathLike)):
        try:
            with open(path, newline="", encoding="utf-8") as fh:
                rows = [r for r in csv.reader(fh)]
        except OSError as exc:
            raise DataFormatError(f"cannot read {path}: {exc}") from exc
        if name is None:
            name = os.path.splitext(os.path.basename(os.fspath(path)))[0]
    else:
        rows = [r for r in csv.reader(path)]
    rows = [r for r in rows if any(f.strip() for f in r)]
    if not rows:
        raise DataFormatError("empty file")

    # string labels are legal data, so a label column chosen by position does
    # not count towards header detection
    checked = list(rows[0])
    by_position = label_column is not None and (
        not isinstance(label_column, str) or label_column.lstrip("-").isdigit())
    if by_position and -len(checked) <= int(label_column) < len(checked):
        del checked[int(label_column)]
    header = None
    if isinstance(label_column, str) and not by_position or any(
            _parse_float(f) is None for f in checked):
        header = [f.strip() for f in rows[0]]
        rows = rows[1:]
        if not rows:
            raise DataFormatError("file has a header row but no data")

    width = len(rows[0]) if header is None else len(header)
    for i, r in enumerate(rows):
        if len(r) != width:
            line = i + 1 + (header is not None)
            raise DataFormatError(
                f"row {line}: expected {width} fields, found {len(r)}")

    label_idx = None
    if label_column is not None:
        if isinstance(label_column, str) and not label_column.lstrip("-").isdigit():
            if header is None or label_column not in header:
                raise DataFormatError(f"label column {label_column!r} not found in header")
            label_idx = header.index(label_column)
        else:
            label_idx = int(label_column)
            if not -width <= label_idx < width:
                raise DataFormatError(
                    f"label column {label_idx} out of range for {width} columns")
            label_idx %= width

    feature_cols = [j for j in range(width) if j != label_idx]
    if not feature_cols:
        raise DataFormatError("no feature columns")
    X = np.empty((len(rows), len(feature_cols)))
    for i, r in enumerate(rows):
        for jj, j in enumerate(feature_cols):
            value = _parse_float(r[j])
            if value is None or not np.isfinite(value):
                line = i + 1 + (header is not None)
                raise DataFormatError(
                    f"row {line}, column {j}: non-numeric feature {r[j]!r}")
            X[i, jj] = value

    truth = None
    if label_idx is not None:
        truth = _code_labels([r[label_idx] for r in rows])

    names = None
    if header is not None:
        names = tuple(header[j] for j in feature_cols)
    if name is None and isinstance(path, (str, os.PathLike)):
        name = os.path.splitext(os.path.basename(os.fspath(path)))[0]
    return Dataset(X, truth, names, name=name or "dataset")


def write_csv(d: Dataset, path: Union[str, os.PathLike, io.TextIOBase],
              header: bool = True) -> None:
    """Write samples (and truth labels as the last column) at 17 significant digits."""
    def _write(fh):
        writer = csv.writer(fh, lineterminator="\n")
        if header:
            names = list(d.feature_names or (f"x{j}" for j in range(d.n)))
            if d.truth_labels is not None:
                names.append("label")
            writer.writerow(names)
        for i in range(d.m):
            row = [format(v, ".17g") for v in d.samples[i]]
            if d.truth_labels is not None:
                row.append(str(int(d.truth_labels[i])))
            writer.writerow(row)

    if isinstance(path, (str, os.PathLike)):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            _write(fh)
    else:
        _write(path)


LABEL_FILE_HEADER = ("index", "label")


def write_labels(labels, path: Union[str, os.PathLike, io.TextIOBase]) -> str:
    """Write ``index,label`` rows (0-based sample index) and return the text."""
    y = check_labels(labels)
    lines = [",".join(LABEL_FILE_HEADER)] + [f"{i},{int(v)}" for i, v in enumerate(y)]
    text = "\n".join(lines) + "\n"
    if isinstance(path, (str, os.PathLike)):
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    elif path is not None:
        path.write(text)
    return text


def read_labels(path: Union[str, os.PathLike, io.TextIOBase]) -> np.ndarray:
    """Read an ``index,label`` file; every index ``0..m-1`` must appear once.

    Labels may be arbitrary tokens; they are coded ``1..k`` by first
    appearance in index order.
    """
    if isinstance(path, (str, os.PathLike)):
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    else:
        rows = list(csv.reader(path))
    rows = [r for r in rows if r and any(c.strip() for c in r)]
    if rows and _parse_float(rows[0][0]) is None:
        rows = rows[1:]
    index, tokens = [], []
    for lineno, r in enumerate(rows, start=1):
        if len(r) != 2:
            raise DataFormatError(f"label row {lineno}: expected 2 fields, got {len(r)}")
        try:
            index.append(int(r[0]))
        except ValueError:
            raise DataFormatError(f"label row {lineno}: index {r[0]!r} is not an integer") from None
        tokens.append(r[1].strip())
    order = np.argsort(index, kind="stable")
    if not np.array_equal(np.asarray(index)[order], np.arange(len(index))):
        raise DataFormatError("label file indices must be exactly 0..m-1")
    tokens = [tokens[i] for i in order]
    return _code_labels(tokens)


def standardize(d: Dataset, mode: str = "minmax") -> Dataset:
    """Scale features; constant features map to 0 in both scaled modes."""
    X = np.array(d.samples, dtype=float)
    if mode == "none":
        return Dataset(X, d.truth_labels, d.feature_names, d.name, "none")
    if mode == "minmax":
        lo = X.min(axis=0)
        span = X.max(axis=0) - lo
        safe = np.where(span > 0, span, 1.0)
        Y = np.where(span > 0, (X - lo) / safe, 0.0)
        Y = np.clip(Y, 0.0, 1.0)
    elif mode == "zscore":
        mean = X.mean(axis=0)
        std = X.std(axis=0)
        safe = np.where(std > 0, std, 1.0)
        Y = np.where(std > 0, (X - mean) / safe, 0.0)
    else:
        raise ValueError(f"unknown standardization mode {mode!r}; "
                         "expected one of minmax, zscore, none")
    return Dataset(Y, d.truth_labels, d.feature_names, d.name, mode)


def split_cluster(d: Union[Dataset, np.ndarray], labels, i: int) -> ClusterSplit:
    """Separate cluster ``i`` from the rest, augmenting both sides with a 1."""
    X = d.samples if isinstance(d, Dataset) else np.asarray(d, dtype=float)
    y = check_labels(labels, m=X.shape[0])
    if i < 1:
        raise ValueError(f"cluster index must be >= 1, got {i}")
    A = augment(X)
    inside = y == i
    within = np.flatnonzero(inside)
    between = np.flatnonzero(~inside)
    return ClusterSplit(A[within].T.copy(), A[between].T.copy(), within, between)


def _check_k(m: int, k: int) -> None:
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if k > m:
        raise ValueError(f"k={k} exceeds the number of samples m={m}")


def repair_empty(labels: np.ndarray, k: int) -> np.ndarray:
    """Fill empty clusters by taking the lowest-index sample of the largest one."""
    y = labels.copy()
    for c in range(1, k + 1):
        if np.any(y == c):
            continue
        counts = np.bincount(y, minlength=k + 1)[1:]
        donor = int(np.argmax(counts)) + 1
        y[np.flatnonzero(y == donor)[0]] = c
    return y


def random_init(d: Union[Dataset, np.ndarray], k: int, seed: int = 0) -> np.ndarray:
    """Uniform random labels, repaired so that all ``k`` clusters are used."""
    X = d.samples if isinstance(d, Dataset) else np.asarray(d)
    m = X.shape[0]
    _check_k(m, k)
    rng = np.random.default_rng(seed)
    y = rng.integers(1, k + 1, size=m)
    return repair_empty(y, k)


def _relabel_by_first_appearance(y: np.ndarray) -> np.ndarray:
    _, first = np.unique(y, return_index=True)
    order = np.argsort(first)
    mapping = np.empty(order.size, dtype=np.int64)
    mapping[order] = np.arange(1, order.size + 1)
    _, inverse = np.unique(y, return_inverse=True)
    return mapping[inverse]


def nng_init(d: Union[Dataset, np.ndarray], k: int, seed: int = 0) -> np.ndarray:
    """Nearest-neighbour-graph initialization.

    Connected components of the undirected 1-NN graph become proto-clusters.
    Surplus components are merged pairwise by closest centroids; missing
    ones are produced by 2-means splits of the largest component.
    """
    X = d.samples if isinstance(d, Dataset) else np.asarray(d, dtype=float)
    m = X.shape[0]
    _check_k(m, k)
    if k == 1:
        return np.ones(m, dtype=np.int64)
    if m == 1:
        return np.ones(1, dtype=np.int64)

    D = cdist(X, X, "sqeuclidean")
    np.fill_diagonal(D, np.inf)
    nearest = np.argmin(D, axis=1)  # argmin returns the lowest index on ties
    graph = coo_matrix((np.ones(m), (np.arange(m), nearest)), shape=(m, m))
    _, comp = connected_components(graph, directed=True, connection="weak")
    y = _relabel_by_first_appearance(comp)

    n_comp = int(y.max())
    while n_comp > k:
        centers = np.array([X[y == c].mean(axis=0) for c in range(1, n_comp + 1)])
        C = cdist(centers, centers, "sqeuclidean")
        np.fill_diagonal(C, np.inf)
        a, b = np.unravel_index(np.argmin(C), C.shape)
        a, b = min(a, b) + 1, max(a, b) + 1
        y[y == b] = a
        y[y > b] -= 1
        n_comp -= 1

    rng = np.random.default_rng(seed)
    while n_comp < k:
        counts = np.bincount(y, minlength=n_comp + 1)[1:]
        big = int(np.argmax(counts)) + 1
        members = np.flatnonzero(y == big)
        halves = _two_means(X[members], rng)
        n_comp += 1
        y[members[halves == 2]] = n_comp
    return _relabel_by_first_appearance(y)


def _two_means(X: np.ndarray, rng: np.random.Generator, max_iter: int = 100) -> np.ndarray:
    """Split rows of ``X`` into two non-empty groups labelled 1 and 2."""
    m = X.shape[0]
    y = repair_empty(rng.integers(1, 3, size=m), 2)
    for _ in range(max_iter):
        centers = np.array([X[y == c].mean(axis=0) for c in (1, 2)])
        new = np.argmin(cdist(X, centers, "sqeuclidean"), axis=1) + 1
        new = repair_empty(new, 2)
        if np.array_equal(new, y):
            break
        y = new
    return y
