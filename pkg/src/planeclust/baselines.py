"""Comparison methods: Lloyd k-means, k-plane clustering and proximal planes."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.spatial.distance import cdist

from . import _outer
from .data import ClusterSplit, Dataset, augment, check_labels, random_init, _check_k
from .ramp import Plane

PPC_RIDGE = 1e-8


@dataclass
class CentroidModel:
    centers: np.ndarray
    k: int
    training_meta: dict = field(default_factory=dict)

    def deviations(self, X) -> np.ndarray:
        """Euclidean distances to each center, shape (m, k)."""
        return np.sqrt(cdist(np.asarray(X, dtype=float), self.centers, "sqeuclidean"))


def fix_sign(v: np.ndarray) -> np.ndarray:
    """Flip ``v`` so that its largest-magnitude entry (first on ties) is positive."""
    v = np.asarray(v, dtype=float)
    j = int(np.argmax(np.abs(v)))
    return -v if v[j] < 0 else v


def _smallest_eigvec(M: np.ndarray):
    vals, vecs = np.linalg.eigh((M + M.T) / 2)
    return vals[0], fix_sign(vecs[:, 0])


def kpc_plane(split: ClusterSplit) -> Plane:
    """Least-squares plane through the within-cluster samples, with ``|w| = 1``."""
    if split.m_i < 1:
        raise ValueError("kpc_plane needs at least one within-cluster sample")
    X = split.Z[:-1].T
    center = X.mean(axis=0)
    R = X - center
    _, w = _smallest_eigvec(R.T @ R)
    w = w / np.linalg.norm(w)
    return Plane(w, -w @ center)


def kpc_objective(split: ClusterSplit, plane: Plane) -> float:
    r = split.Z.T @ plane.u
    return float(r @ r)


def ppc_matrix(split: ClusterSplit, c: float, ridge: float = PPC_RIDGE) -> np.ndarray:
    G = split.Z @ split.Z.T
    H = split.Zhat @ split.Zhat.T
    return G - c * H + ridge * np.eye(split.dim)


def ppc_plane(split: ClusterSplit, c: float) -> Plane:
    """Proximal plane with the augmented normalization ``|(w; b)| = 1``.

    Minimizes ``|Z.T u|^2 - c |Zhat.T u|^2`` over unit ``u`` by taking the
    eigenvector of the smallest eigenvalue of ``Z Z.T - c Zhat Zhat.T``
    (plus a small ridge).
    """
    if c <= 0:
        raise ValueError(f"c must be positive, got {c}")
    _, v = _smallest_eigvec(ppc_matrix(split, c))
    return Plane.from_u(v / np.linalg.norm(v))


def ppc_objective(split: ClusterSplit, plane: Plane, c: float) -> float:
    a = split.Z.T @ plane.u
    ah = split.Zhat.T @ plane.u
    return float(a @ a - c * (ah @ ah))


def _samples(d):
    return d.samples if isinstance(d, Dataset) else np.asarray(d, dtype=float)


def _plane_model(result, k, n, method, meta):
    from .cluster import PlaneModel

    info = dict(meta, method=method, outer_iterations=result.n_iter,
                objective=result.objective, stop_reason=result.stop_reason,
                final_labels=result.labels)
    return PlaneModel(result.planes, k, info, mode=method)


def kpc_fit(d, k: int, init, outer_max: int = 50):
    """k-plane clustering driven by the shared plane/label loop."""
    X = _samples(d)
    _check_k(X.shape[0], k)
    result = _outer.run_outer_loop(
        augment(X), k, check_labels(init, m=X.shape[0], k=k),
        lambda split, i, prev: kpc_plane(split) if split.m_i else Plane.zeros(X.shape[1]),
        kpc_objective, outer_max)
    return _plane_model(result, k, X.shape[1], "kpc", {"outer_max": outer_max})


def ppc_fit(d, k: int, c: float, init, outer_max: int = 50):
    """Proximal plane clustering driven by the shared plane/label loop."""
    X = _samples(d)
    _check_k(X.shape[0], k)
    result = _outer.run_outer_loop(
        augment(X), k, check_labels(init, m=X.shape[0], k=k),
        lambda split, i, prev: ppc_plane(split, c),
        lambda split, plane: ppc_objective(split, plane, c), outer_max)
    return _plane_model(result, k, X.shape[1], "ppc", {"c": c, "outer_max": outer_max})


def kmeans_objective(X: np.ndarray, labels: np.ndarray, centers: np.ndarray) -> float:
    return float(np.sum((X - centers[labels - 1]) ** 2))


def kmeans_fit(d, k: int, seed: int = 0, outer_max: int = 100,
               init: Optional[np.ndarray] = None) -> CentroidModel:
    """Lloyd iterations from a seeded random labeling."""
    X = _samples(d)
    m = X.shape[0]
    _check_k(m, k)
    labels = random_init(X, k, seed) if init is None else check_labels(init, m=m, k=k)
    trace = []
    n_iter = 0
    for n_iter in range(1, outer_max + 1):
        centers = np.array([X[labels == c].mean(axis=0) for c in range(1, k + 1)])
        trace.append(kmeans_objective(X, labels, centers))
        dist = cdist(X, centers, "sqeuclidean")
        new = np.argmin(dist, axis=1).astype(np.int64) + 1
        new = _outer.repair_worst_fit(new, np.sqrt(dist), k)
        if np.array_equal(new, labels):
            break
        labels = new
    centers = np.array([X[labels == c].mean(axis=0) for c in range(1, k + 1)])
    meta = {"method": "kmeans", "seed": seed, "outer_iterations": n_iter,
            "objective_trace": trace, "final_labels": labels,
            "objective": kmeans_objective(X, labels, centers)}
    return CentroidModel(centers, k, meta)
