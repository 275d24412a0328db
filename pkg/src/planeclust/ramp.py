"""Bounded ramp costs for plane-based clustering.

``ramp_r1`` charges samples of the cluster being fitted for their distance
to its plane, and saturates at ``1 - s``. ``ramp_r2`` charges samples of the
other clusters for being close to the plane, and never drops below
``1 + delta - s``.
"""
from __future__ import annotations

import csv
import io
import os
from dataclasses import dataclass
from typing import Iterable, Union

import numpy as np

DEFAULT_DELTA = 0.3
DEFAULT_S = -0.2

LOSS_CURVE_HEADER = ("dev", "r1", "r2", "quad", "abs", "twsvc_between")


@dataclass(frozen=True)
class HyperParams:
    """Model constants. ``mu`` is only read in kernel mode and ``c`` only by PPC."""

    c1: float = 1.0
    c2: float = 1.0
    delta: float = DEFAULT_DELTA
    s: float = DEFAULT_S
    mu: float = 1.0
    c: float = 1.0

    def __post_init__(self):
        for name in ("c1", "c2", "mu", "c"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be positive, got {value}")
        if not 0 <= self.delta < 1:
            raise ValueError(f"delta must lie in [0,1), got {self.delta}")
        if not -1 < self.s <= 0:
            raise ValueError(f"s must lie in (-1,0], got {self.s}")


@dataclass(frozen=True)
class Plane:
    """A cluster-center plane ``w @ x + b = 0``."""

    w: np.ndarray
    b: float

    def __post_init__(self):
        w = np.array(self.w, dtype=float).ravel()
        if not (np.all(np.isfinite(w)) and np.isfinite(self.b)):
            raise ValueError("plane parameters must be finite")
        w.setflags(write=False)
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "b", float(self.b))

    @property
    def u(self) -> np.ndarray:
        """Stacked vector ``(w; b)``."""
        return np.append(self.w, self.b)

    @classmethod
    def from_u(cls, u) -> "Plane":
        u = np.asarray(u, dtype=float)
        return cls(u[:-1], u[-1])

    @classmethod
    def zeros(cls, dim: int) -> "Plane":
        return cls(np.zeros(dim), 0.0)


def deviation(p: Plane, z) -> Union[float, np.ndarray]:
    """Signed deviation ``w @ x + b``.

    ``z`` may be a raw sample (length ``d``) or an augmented one (length
    ``d + 1``, trailing 1); a 2-D input is treated as a stack of rows.
    """
    z = np.asarray(z, dtype=float)
    d = p.w.shape[0]
    width = z.shape[-1]
    if width == d:
        out = z @ p.w + p.b
    elif width == d + 1:
        out = z @ p.u
    else:
        raise ValueError(f"sample of length {width} does not match plane of dimension {d}")
    return float(out) if np.ndim(out) == 0 else out


def ramp_r1(dev, delta: float = DEFAULT_DELTA, s: float = DEFAULT_S):
    """Within-cluster ramp cost, ``0`` near the plane and ``1 - s`` far away."""
    a = np.abs(np.asarray(dev, dtype=float))
    out = np.where(a <= 1 - delta, 0.0,
                   np.where(a >= 2 - delta - s, 1 - s, a - 1 + delta))
    return float(out) if out.ndim == 0 else out


def ramp_r2(dev, delta: float = DEFAULT_DELTA, s: float = DEFAULT_S):
    """Between-cluster ramp cost, ``2 + 2*delta`` on the plane."""
    a = np.abs(np.asarray(dev, dtype=float))
    out = np.where(a <= -s, 2 + 2 * delta,
                   np.where(a >= 1 + delta, 1 + delta - s, -a + 2 + 2 * delta - s))
    return float(out) if out.ndim == 0 else out


def plane_objective(u: Union[Plane, np.ndarray], split, hp: HyperParams) -> float:
    """Regularized ramp objective of one plane for a given split."""
    uv = u.u if isinstance(u, Plane) else np.asarray(u, dtype=float)
    if uv.shape[0] != split.dim:
        raise ValueError(f"plane of length {uv.shape[0]} does not match split dimension {split.dim}")
    within = split.Z.T @ uv
    between = split.Zhat.T @ uv
    return float(0.5 * uv @ uv
                 + hp.c1 * np.sum(ramp_r1(within, hp.delta, hp.s))
                 + hp.c2 * np.sum(ramp_r2(between, hp.delta, hp.s)))


def loss_curves(hp: HyperParams, grid: Iterable[float]) -> np.ndarray:
    """Table of cost functions over a deviation grid, one row per point.

    Columns follow ``LOSS_CURVE_HEADER``: the two ramp costs, the quadratic
    and absolute costs of kPC/PPC-style methods, and the hinge
    ``(1 - |dev|)_+`` used on between-cluster samples by TWSVC.
    """
    dev = np.asarray(list(grid), dtype=float).ravel()
    table = np.column_stack([
        dev,
        np.atleast_1d(ramp_r1(dev, hp.delta, hp.s)),
        np.atleast_1d(ramp_r2(dev, hp.delta, hp.s)),
        dev ** 2,
        np.abs(dev),
        np.maximum(1 - np.abs(dev), 0.0),
    ]) if dev.size else np.empty((0, len(LOSS_CURVE_HEADER)))
    return table


def export_loss_curves(hp: HyperParams, grid: Iterable[float],
                       out: Union[str, os.PathLike, io.TextIOBase, None] = None) -> str:
    """Write the loss-curve table as CSV; returns the CSV text."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(LOSS_CURVE_HEADER)
    for row in loss_curves(hp, grid):
        writer.writerow([format(v, ".17g") for v in row])
    text = buf.getvalue()
    if isinstance(out, (str, os.PathLike)):
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    elif out is not None:
        out.write(text)
    return text


def default_grid(lo: float = -3.0, hi: float = 3.0, step: float = 0.01) -> np.ndarray:
    """Evenly spaced deviations from ``lo`` to ``hi`` inclusive."""
    count = int(round((hi - lo) / step)) + 1
    return np.round(lo + step * np.arange(count), 12)
