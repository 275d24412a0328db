"""Linear and Gaussian-kernel ramp twin support vector clustering.

Each cluster center is a plane ``w @ x + b = 0`` (linear mode) or a
manifold ``K(x, X) @ w + b = 0`` in the space spanned by kernel evaluations
against the training set (kernel mode). Samples are assigned to the center
with the smallest absolute deviation.
"""
from __future__ import annotations

import io
import os
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Union

import numpy as np
from scipy.spatial.distance import cdist

from . import _outer
from .baselines import CentroidModel, kpc_plane, ppc_plane
from .data import Dataset, augment, check_labels, _check_k
from .ramp import HyperParams, Plane, plane_objective, ramp_r1, ramp_r2
from .solver import CccpState, SolverOptions, solve_plane_cccp

MODEL_MAGIC = "planeclust-model"
MODEL_VERSION = "v1"


def gram(A, B, mu: float, kernel: str = "rbf") -> np.ndarray:
    """Kernel matrix between the rows of ``A`` and ``B``.

    ``kernel='rbf'`` gives ``exp(-mu * |a - b|^2)``; ``kernel='linear'`` gives
    the dot product and ignores ``mu``.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    if A.shape[1] != B.shape[1]:
        raise ValueError(f"feature dimensions differ: {A.shape[1]} vs {B.shape[1]}")
    if kernel == "linear":
        return A @ B.T
    if kernel != "rbf":
        raise ValueError(f"unknown kernel {kernel!r}")
    if not mu > 0:
        raise ValueError(f"mu must be positive, got {mu}")
    return np.exp(-mu * cdist(A, B, "sqeuclidean"))


@dataclass
class PlaneModel:
    planes: List[Plane]
    k: int
    training_meta: dict = field(default_factory=dict)
    mode: str = "linear"

    @property
    def n_features(self) -> int:
        return self.planes[0].w.shape[0]

    def features(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} features, got {X.shape[1]}")
        return X

    def deviations(self, X) -> np.ndarray:
        """Signed deviation of every sample from every plane, shape (m, k)."""
        return _outer.plane_deviations(augment(self.features(X)), self.planes)


@dataclass
class KernelModel(PlaneModel):
    support: np.ndarray = field(default_factory=lambda: np.empty((0, 0)))
    mu: float = 1.0
    kernel: str = "rbf"
    mode: str = "kernel"

    def __post_init__(self):
        for p in self.planes:
            if p.w.shape[0] != self.support.shape[0]:
                raise ValueError("plane coefficient length must equal the support size")

    @property
    def n_features(self) -> int:
        return self.support.shape[1]

    def features(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} features, got {X.shape[1]}")
        return gram(X, self.support, self.mu, self.kernel)


Model = Union[PlaneModel, KernelModel, CentroidModel]


def scale_plane(u: np.ndarray, split, hp: HyperParams):
    """Best nonnegative multiple of ``u`` for the ramp objective; returns ``(plane, value)``.

    The objective along ``t * u`` (``t >= 0``) is a quadratic plus a
    piecewise-linear function of ``t``, so its minimum lies at a breakpoint
    or at the stationary point of one of the quadratic pieces; all of those
    candidates are evaluated exactly.
    """
    u = np.asarray(u, dtype=float)
    a = np.abs(split.Z.T @ u)
    ah = np.abs(split.Zhat.T @ u)
    knots_w = np.array([1 - hp.delta, 2 - hp.delta - hp.s])
    knots_b = np.array([-hp.s, 1 + hp.delta])
    with np.errstate(divide="ignore"):
        breaks = np.concatenate([(knots_w[:, None] / a).ravel(),
                                 (knots_b[:, None] / ah).ravel()])
    breaks = np.unique(breaks[np.isfinite(breaks) & (breaks > 0)])
    edges = np.concatenate([[0.0], breaks])
    # slope of the piecewise-linear part just right of each edge
    mid = np.concatenate([(edges[:-1] + edges[1:]) / 2, [edges[-1] + 1.0]])
    ta = mid[:, None] * a
    tah = mid[:, None] * ah
    slope = (hp.c1 * (a * ((ta > knots_w[0]) & (ta < knots_w[1]))).sum(axis=1)
             - hp.c2 * (ah * ((tah > knots_b[0]) & (tah < knots_b[1]))).sum(axis=1))
    stationary = -slope / (u @ u)
    candidates = np.concatenate([edges, stationary[stationary > 0]])
    ta = candidates[:, None] * a
    tah = candidates[:, None] * ah
    values = (0.5 * candidates ** 2 * (u @ u)
              + hp.c1 * ramp_r1(ta, hp.delta, hp.s).sum(axis=1)
              + hp.c2 * ramp_r2(tah, hp.delta, hp.s).sum(axis=1))
    best = int(np.argmin(values))
    return Plane.from_u(candidates[best] * u), float(values[best])


INIT_PPC_WEIGHTS = (2.0 ** -4, 1.0)


def initial_plane(split, hp: HyperParams) -> Plane:
    """Starting plane for the first outer round.

    Candidates are the least-squares (kPC) direction and a few proximal
    (PPC) directions, each rescaled by :func:`scale_plane`; the one with
    the lowest ramp objective wins. The PPC directions matter when the
    within-cluster scatter is rank deficient (kernel mode), where the
    least-squares direction is an arbitrary null-space vector.
    """
    best = scale_plane(kpc_plane(split).u, split, hp)
    if split.Zhat.shape[1]:
        for c in INIT_PPC_WEIGHTS:
            cand = scale_plane(ppc_plane(split, c).u, split, hp)
            if cand[1] < best[1]:
                best = cand
    return best[0]


def _samples(X) -> np.ndarray:
    return X.samples if isinstance(X, Dataset) else np.asarray(X, dtype=float)


def assign(model: Model, X) -> np.ndarray:
    """Labels ``1..k`` by smallest absolute deviation (lowest index on ties)."""
    return _outer.assign_by_deviation(model.deviations(_samples(X)))


predict = assign


def fit(d, k: int, hp: Optional[HyperParams] = None, mode: str = "linear", init=None,
        opts: Optional[SolverOptions] = None, outer_max: int = 50,
        kernel: str = "rbf", gram_matrix: Optional[np.ndarray] = None,
        on_solve: Optional[Callable[[int, int, CccpState], None]] = None) -> PlaneModel:
    """Fit ``k`` ramp-loss cluster centers starting from the labels ``init``.

    Every outer round solves one ramp problem per cluster (warm-started from
    the previous round, or from the cluster's rescaled least-squares plane
    in the first round) and then reassigns all samples.

    Parameters
    ----------
    d : Dataset or array of shape (m, n)
    k : int
    hp : HyperParams
    mode : {'linear', 'kernel'}
    init : array of shape (m,)
        Initial labels in ``1..k``.
    opts : SolverOptions
    outer_max : int
    kernel : {'rbf', 'linear'}
        Kernel used in kernel mode; ``hp.mu`` is the RBF width.
    gram_matrix : array of shape (m, m), optional
        Precomputed training kernel matrix, reused across parameter sweeps.
    on_solve : callable, optional
        Called as ``on_solve(round, cluster, state)`` after every per-plane
        solve; used for diagnostics dumps.
    """
    hp = hp or HyperParams()
    opts = opts or SolverOptions()
    X = _samples(d)
    m = X.shape[0]
    _check_k(m, k)
    if init is None:
        raise ValueError("fit needs an initial labeling; see data.nng_init")
    init = check_labels(init, m=m, k=k)
    if mode == "linear":
        F = X
    elif mode == "kernel":
        F = gram(X, X, hp.mu, kernel) if gram_matrix is None else np.asarray(gram_matrix)
        if F.shape != (m, m):
            raise ValueError(f"gram_matrix must have shape {(m, m)}, got {F.shape}")
    else:
        raise ValueError(f"mode must be 'linear' or 'kernel', got {mode!r}")
    A = augment(F)
    states = {}
    rounds = [0]

    def fit_plane(split, i, previous):
        if i == 1:
            rounds[0] += 1
        if split.m_i == 0:
            return Plane.zeros(F.shape[1])
        u0 = previous if previous is not None else initial_plane(split, hp)
        plane, state = solve_plane_cccp(split, hp, opts, u0)
        states[i] = state
        if on_solve is not None:
            on_solve(rounds[0], i, state)
        return plane

    result = _outer.run_outer_loop(A, k, init, fit_plane,
                                   lambda split, plane: plane_objective(plane, split, hp),
                                   outer_max)
    meta = {
        "method": "ramptwsvc", "hyperparams": hp, "outer_iterations": result.n_iter,
        "objective": result.objective, "stop_reason": result.stop_reason,
        "final_labels": result.labels, "fit_labels": result.fit_labels,
        "scaling": getattr(d, "scaling", "none"), "outer_max": outer_max,
        "cccp_iterations": {i: s.iterations for i, s in states.items()},
    }
    if mode == "linear":
        return PlaneModel(result.planes, k, meta, mode="linear")
    return KernelModel(result.planes, k, meta, support=X.copy(), mu=hp.mu, kernel=kernel)


# -- serialization -----------------------------------------------------------

def _fmt(values) -> str:
    return " ".join(format(float(v), ".17g") for v in values)


def save_model(model: Model, out: Union[str, os.PathLike, io.TextIOBase]) -> str:
    """Write ``model`` in the versioned plain-text format and return the text."""
    lines = []
    if isinstance(model, KernelModel):
        m, n = model.support.shape
        lines.append(f"{MODEL_MAGIC} {MODEL_VERSION} mode=kernel k={model.k} n={n} "
                     f"m={m} mu={format(model.mu, '.17g')}")
        lines += [_fmt(list(p.w) + [p.b]) for p in model.planes]
        lines += [_fmt(row) for row in model.support]
    elif isinstance(model, CentroidModel):
        lines.append(f"{MODEL_MAGIC} {MODEL_VERSION} mode=kmeans k={model.k} "
                     f"n={model.centers.shape[1]}")
        lines += [_fmt(row) for row in model.centers]
    else:
        lines.append(f"{MODEL_MAGIC} {MODEL_VERSION} mode={model.mode} k={model.k} "
                     f"n={model.n_features}")
        lines += [_fmt(list(p.w) + [p.b]) for p in model.planes]
    text = "\n".join(lines) + "\n"
    if isinstance(out, (str, os.PathLike)):
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    elif out is not None:
        out.write(text)
    return text


def load_model(source: Union[str, os.PathLike, io.TextIOBase]) -> Model:
    """Inverse of :func:`save_model`."""
    if isinstance(source, (str, os.PathLike)):
        with open(source, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    else:
        lines = source.read().splitlines()
    if not lines:
        raise ValueError("empty model file")
    head = lines[0].split()
    if len(head) < 2 or head[0] != MODEL_MAGIC or head[1] != MODEL_VERSION:
        raise ValueError(f"not a {MODEL_MAGIC} {MODEL_VERSION} file: {lines[0]!r}")
    fields = dict(item.split("=", 1) for item in head[2:])
    mode, k, n = fields["mode"], int(fields["k"]), int(fields["n"])
    body = [np.array(line.split(), dtype=float) for line in lines[1:] if line.strip()]
    if mode == "kmeans":
        return CentroidModel(np.vstack(body[:k]).reshape(k, n), k, {"method": "kmeans"})
    planes = [Plane.from_u(row) for row in body[:k]]
    if mode == "kernel":
        m = int(fields["m"])
        support = np.vstack(body[k:k + m]).reshape(m, n)
        return KernelModel(planes, k, {"method": "ramptwsvc"}, support=support,
                           mu=float(fields["mu"]))
    return PlaneModel(planes, k, {"method": mode}, mode=mode)
