"""The plane/label alternation shared by every plane-based method."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np

from .data import ClusterSplit, check_labels
from .ramp import Plane

PlaneFitter = Callable[[ClusterSplit, int, Optional[Plane]], Plane]
PlaneScorer = Callable[[ClusterSplit, Plane], float]


@dataclass
class OuterResult:
    planes: List[Plane]
    labels: np.ndarray
    fit_labels: np.ndarray
    n_iter: int
    objective: float
    stop_reason: str
    label_history: List[np.ndarray] = field(default_factory=list)


def make_split(A: np.ndarray, labels: np.ndarray, i: int) -> ClusterSplit:
    """Split rows of an augmented matrix ``A`` (m x (d+1)) by cluster ``i``."""
    inside = labels == i
    within = np.flatnonzero(inside)
    between = np.flatnonzero(~inside)
    return ClusterSplit(A[within].T, A[between].T, within, between)


def plane_deviations(A: np.ndarray, planes: List[Plane]) -> np.ndarray:
    """Signed deviations of augmented rows from each plane, shape (m, k)."""
    U = np.column_stack([p.u for p in planes])
    return A @ U


def assign_by_deviation(dev: np.ndarray) -> np.ndarray:
    """Index (1-based) of the plane with smallest absolute deviation; ties go low."""
    return np.argmin(np.abs(dev), axis=1).astype(np.int64) + 1


def repair_worst_fit(labels: np.ndarray, dev: np.ndarray, k: int) -> np.ndarray:
    """Give each empty cluster the worst-fitting member of the largest cluster."""
    y = labels.copy()
    own = np.abs(dev[np.arange(y.size), y - 1])
    for c in range(1, k + 1):
        if np.any(y == c):
            continue
        counts = np.bincount(y, minlength=k + 1)[1:]
        donor = int(np.argmax(counts)) + 1
        members = np.flatnonzero(y == donor)
        if members.size < 2:
            break
        pick = members[int(np.argmax(own[members]))]
        y[pick] = c
        own[pick] = np.abs(dev[pick, c - 1])
    return y


def run_outer_loop(A: np.ndarray, k: int, init, fit_plane: PlaneFitter,
                   score_plane: PlaneScorer, outer_max: int = 50) -> OuterResult:
    """Alternate plane fitting and reassignment until the labels settle.

    ``A`` holds augmented samples as rows. Stops when a reassignment
    reproduces the labels the planes were fitted on, when ``outer_max``
    rounds have run, or when the labels return to the state of two rounds
    earlier; in the last case the lower-objective of the two competing
    models is kept.
    """
    m = A.shape[0]
    labels = check_labels(init, m=m, k=k)
    if outer_max < 1:
        raise ValueError("outer_max must be >= 1")
    prev: List[Optional[Plane]] = [None] * k
    history = [labels]
    candidates = []

    def _fit(y):
        planes, total = [], 0.0
        for i in range(1, k + 1):
            split = make_split(A, y, i)
            plane = fit_plane(split, i, prev[i - 1])
            planes.append(plane)
            total += score_plane(split, plane)
        return planes, total

    reason = "outer_max"
    n_iter = 0
    planes: List[Plane] = []
    for n_iter in range(1, outer_max + 1):
        planes, objective = _fit(labels)
        prev = list(planes)
        dev = plane_deviations(A, planes)
        raw = assign_by_deviation(dev)
        candidates.append((planes, objective, labels, raw))
        if np.array_equal(raw, labels):
            reason = "converged"
            break
        new = repair_worst_fit(raw, dev, k)
        if len(history) >= 2 and np.array_equal(new, history[-2]):
            reason = "oscillation"
            best = min(candidates[-2:], key=lambda c: c[1])
            planes, objective, labels, raw = best
            history.append(new)
            return OuterResult(list(planes), raw, labels, n_iter, objective, reason, history)
        labels = new
        history.append(labels)

    planes, objective, fit_labels, raw = candidates[-1]
    return OuterResult(list(planes), raw, fit_labels, n_iter, objective, reason, history)
