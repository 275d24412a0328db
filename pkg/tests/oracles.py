"""Reference implementations used only by the tests.

Each one is written from the defining formulas with plain loops and shares
no code with the package, so agreement between the two is evidence rather
than tautology.
"""
from __future__ import annotations

import itertools
import math

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - numba is a test extra
    numba = None


# -- ramp costs ------------------------------------------------------------------

def r1_scalar(dev: float, delta: float, s: float) -> float:
    a = abs(dev)
    if a <= 1 - delta:
        return 0.0
    if a >= 2 - delta - s:
        return 1 - s
    return a - 1 + delta


def r2_scalar(dev: float, delta: float, s: float) -> float:
    a = abs(dev)
    if a <= -s:
        return 2 + 2 * delta
    if a >= 1 + delta:
        return 1 + delta - s
    return -a + 2 + 2 * delta - s


def ramp_objective_loops(u, Z, Zhat, c1, c2, delta, s) -> float:
    total = 0.5 * sum(v * v for v in u)
    for j in range(Z.shape[1]):
        total += c1 * r1_scalar(sum(Z[i, j] * u[i] for i in range(len(u))), delta, s)
    for j in range(Zhat.shape[1]):
        total += c2 * r2_scalar(sum(Zhat[i, j] * u[i] for i in range(len(u))), delta, s)
    return total


# -- metrics ---------------------------------------------------------------------

def rand_by_pairs(a, b) -> float:
    pairs = list(itertools.combinations(range(len(a)), 2))
    agree = sum((a[i] == a[j]) == (b[i] == b[j]) for i, j in pairs)
    return 100.0 * agree / len(pairs)


def nmi_by_sums(a, b) -> float:
    m = len(a)
    ca, cb, cab = {}, {}, {}
    for x, y in zip(a, b):
        ca[x] = ca.get(x, 0) + 1
        cb[y] = cb.get(y, 0) + 1
        cab[(x, y)] = cab.get((x, y), 0) + 1
    ha = -sum(n / m * math.log(n / m) for n in ca.values())
    hb = -sum(n / m * math.log(n / m) for n in cb.values())
    if ha == 0 and hb == 0:
        return 100.0
    if ha == 0 or hb == 0:
        return 0.0
    info = sum(n / m * math.log((n / m) / ((ca[x] / m) * (cb[y] / m)))
               for (x, y), n in cab.items())
    return 100.0 * info / max(ha, hb)


# -- fixed-indicator subproblem ----------------------------------------------------

def _subgradient_loop(Z, Zhat, p1, p2, c1, c2, delta, steps):
    """Subgradient descent from the origin with step 1/(t+1), the classic
    choice for a 1-strongly convex objective; the best iterate wins."""
    d = Z.shape[0]
    u = np.zeros(d)
    best_u = u.copy()
    best = np.inf
    g = np.zeros(d)
    lo = -1.0 + delta
    hi = 1.0 + delta
    for t in range(steps):
        f = 0.0
        for i in range(d):
            f += 0.5 * u[i] * u[i]
            g[i] = u[i]
        for j in range(Z.shape[1]):
            a = 0.0
            for i in range(d):
                a += Z[i, j] * u[i]
            f += c1 * p1[j] * a
            coef = c1 * p1[j]
            if lo - a > 0:
                f += c1 * (lo - a)
                coef -= c1
            if lo + a > 0:
                f += c1 * (lo + a)
                coef += c1
            for i in range(d):
                g[i] += coef * Z[i, j]
        for j in range(Zhat.shape[1]):
            a = 0.0
            for i in range(d):
                a += Zhat[i, j] * u[i]
            f += c2 * p2[j] * a
            coef = c2 * p2[j]
            if hi - a > 0:
                f += c2 * (hi - a)
                coef -= c2
            if hi + a > 0:
                f += c2 * (hi + a)
                coef += c2
            for i in range(d):
                g[i] += coef * Zhat[i, j]
        if f < best:
            best = f
            for i in range(d):
                best_u[i] = u[i]
        step = 1.0 / (t + 1.0)
        for i in range(d):
            u[i] -= step * g[i]
    return best, best_u


if numba is not None:
    _subgradient_loop = numba.njit(cache=True)(_subgradient_loop)


def subgradient_oracle(Z, Zhat, p1, p2, c1, c2, delta, steps=1_000_000):
    """Best objective value and point found by long-horizon subgradient descent."""
    return _subgradient_loop(np.ascontiguousarray(Z, dtype=float),
                             np.ascontiguousarray(Zhat, dtype=float),
                             np.asarray(p1, dtype=float), np.asarray(p2, dtype=float),
                             float(c1), float(c2), float(delta), int(steps))
