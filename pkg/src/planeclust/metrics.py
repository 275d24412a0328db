"""Pairwise accuracy (Rand index) and normalized mutual information, in percent."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np


def _pair(truth, pred, min_len: int):
    a = np.asarray(truth).ravel()
    b = np.asarray(pred).ravel()
    if a.shape[0] != b.shape[0]:
        raise ValueError(f"label lengths differ: truth has {a.shape[0]}, pred has {b.shape[0]}")
    if a.shape[0] < min_len:
        raise ValueError(f"need at least {min_len} samples, got {a.shape[0]}")
    return a, b


def contingency(truth, pred) -> np.ndarray:
    """Count table with truth clusters as rows and predicted clusters as columns.

    Rows and columns follow the sorted distinct label values.
    """
    return _table(*_pair(truth, pred, 0))


def _table(a, b):
    ua, ub = np.unique(a), np.unique(b)
    codes = np.searchsorted(ua, a) * len(ub) + np.searchsorted(ub, b)
    flat = np.bincount(codes, minlength=len(ua) * len(ub))
    return flat.reshape(len(ua), len(ub)).astype(np.int64)


def _comb2(x):
    x = np.asarray(x, dtype=np.float64)
    return x * (x - 1) / 2


def rand_accuracy(truth, pred) -> float:
    """Percentage of sample pairs on which the two partitions agree.

    A pair agrees when both partitions put it in the same cluster or both
    separate it.
    """
    a, b = _pair(truth, pred, 2)
    table = _table(a, b)
    m = a.shape[0]
    total = _comb2(m)
    same_both = _comb2(table).sum()
    same_truth = _comb2(table.sum(axis=1)).sum()
    same_pred = _comb2(table.sum(axis=0)).sum()
    agree = total + 2 * same_both - same_truth - same_pred
    return float(100.0 * agree / total)


def _entropy(counts: np.ndarray, m: int) -> float:
    p = counts[counts > 0] / m
    return float(-(p * np.log(p)).sum())


def nmi(truth, pred) -> float:
    """Mutual information over the larger of the two entropies, in percent.

    Both partitions trivial gives 100; exactly one trivial gives 0.
    """
    a, b = _pair(truth, pred, 1)
    table = _table(a, b)
    m = a.shape[0]
    h_true = _entropy(table.sum(axis=1), m)
    h_pred = _entropy(table.sum(axis=0), m)
    if h_true == 0 and h_pred == 0:
        return 100.0
    if h_true == 0 or h_pred == 0:
        return 0.0
    joint = table / m
    outer = np.outer(table.sum(axis=1), table.sum(axis=0)) / m ** 2
    nz = joint > 0
    info = float((joint[nz] * np.log(joint[nz] / outer[nz])).sum())
    return float(min(max(100.0 * info / max(h_true, h_pred), 0.0), 100.0))


@dataclass(frozen=True)
class MetricReport:
    ac_percent: float
    mi_percent: float
    contingency: np.ndarray

    def __post_init__(self):
        for name in ("ac_percent", "mi_percent"):
            v = getattr(self, name)
            if not 0.0 <= v <= 100.0:
                raise ValueError(f"{name} must lie in [0, 100], got {v}")

    @classmethod
    def from_labels(cls, truth, pred) -> "MetricReport":
        return cls(rand_accuracy(truth, pred), nmi(truth, pred), contingency(truth, pred))


REPORT_HEADER = ("dataset", "method", "ac", "mi", "params", "seed")


@dataclass(frozen=True)
class ReportRow:
    dataset: str
    method: str
    ac: float
    mi: float
    params: str = ""
    seed: Optional[int] = None

    def cells(self):
        return (self.dataset, self.method, f"{self.ac:.2f}", f"{self.mi:.2f}",
                self.params, "" if self.seed is None else str(self.seed))


def report_csv(rows: Iterable[ReportRow], out=None) -> str:
    """CSV with columns ``dataset,method,ac,mi,params,seed``."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(REPORT_HEADER)
    for r in rows:
        writer.writerow(r.cells())
    text = buf.getvalue()
    if out is not None:
        out.write(text)
    return text


def aligned_table(header: Sequence[str], rows: Iterable[Sequence[str]]) -> str:
    """Plain-text table with left-aligned first column and right-aligned others."""
    rows = [[str(c) for c in r] for r in rows]
    header = [str(h) for h in header]
    widths = [max([len(header[j])] + [len(r[j]) for r in rows]) for j in range(len(header))]

    def fmt(cells):
        parts = [cells[0].ljust(widths[0])]
        parts += [c.rjust(w) for c, w in zip(cells[1:], widths[1:])]
        return "  ".join(parts).rstrip()

    lines = [fmt(header), "  ".join("-" * w for w in widths)]
    lines += [fmt(r) for r in rows]
    return "\n".join(lines) + "\n"


def report_table(rows: Iterable[ReportRow]) -> str:
    return aligned_table(REPORT_HEADER, [r.cells() for r in rows])
