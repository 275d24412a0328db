"""Alternating solver for the per-plane ramp problem.

The ramp objective of one plane is a difference of convex functions. Writing
the concave part through integer indicator vectors ``p1`` (within-cluster
samples) and ``p2`` (between-cluster samples) turns it into a mixed-integer
problem: for fixed ``(p1, p2)`` the remaining problem in ``u = (w; b)`` is
strongly convex, and for fixed ``u`` the indicators have a closed form.
:func:`solve_plane_cccp` alternates the two steps until the objective stops
decreasing.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
from sklearn.exceptions import ConvergenceWarning

from .data import ClusterSplit
from .ramp import HyperParams, Plane


@dataclass(frozen=True)
class SolverOptions:
    max_iter: int = 200
    subproblem_tol: float = 1e-8
    smoothing: float = 1e-6
    objective_tol: float = 1e-10
    newton_max_iter: int = 200

    def __post_init__(self):
        if self.max_iter < 1 or self.newton_max_iter < 1:
            raise ValueError("iteration caps must be >= 1")
        if not (self.subproblem_tol > 0 and self.smoothing > 0):
            raise ValueError("subproblem_tol and smoothing must be positive")
        if self.objective_tol < 0:
            raise ValueError("objective_tol must be nonnegative")


@dataclass
class CccpState:
    """Final iterate of :func:`solve_plane_cccp` and its history.

    ``objective_trace[t]`` is the mixed-integer objective (fixed-p objective
    plus the constants dropped by the linearization) after ``t`` subproblem
    solves; it equals the ramp objective of the iterate at that point.
    """

    u: Plane
    p1: np.ndarray
    p2: np.ndarray
    objective_trace: List[float] = field(default_factory=list)
    iterations: int = 0
    converged: bool = True
    nnz_trace: List[Tuple[int, int]] = field(default_factory=list)

    def trace_rows(self):
        """Rows ``(iter, objective, nnz_p1, nnz_p2)`` for a diagnostics dump."""
        return [(t, obj, a, b) for t, (obj, (a, b))
                in enumerate(zip(self.objective_trace, self.nnz_trace))]


def _u_vector(u, dim: int) -> np.ndarray:
    uv = u.u if isinstance(u, Plane) else np.asarray(u, dtype=float).ravel()
    if uv.shape[0] != dim:
        raise ValueError(f"plane of length {uv.shape[0]} does not match split dimension {dim}")
    return uv


def _check_p(p1, p2, split: ClusterSplit):
    p1 = np.asarray(p1, dtype=float).ravel()
    p2 = np.asarray(p2, dtype=float).ravel()
    if p1.shape[0] != split.Z.shape[1] or p2.shape[0] != split.Zhat.shape[1]:
        raise ValueError(
            f"p1/p2 lengths ({p1.shape[0]}, {p2.shape[0]}) do not match split "
            f"({split.Z.shape[1]}, {split.Zhat.shape[1]})")
    return p1, p2


def update_p(u, split: ClusterSplit, delta: float, s: float):
    """Indicator vectors for the current plane (strict thresholds, ties to 0)."""
    uv = _u_vector(u, split.dim)
    within = split.Z.T @ uv
    between = split.Zhat.T @ uv
    far = 2 - delta - s
    p1 = np.where(within > far, -1, np.where(within < -far, 1, 0)).astype(np.int64)
    p2 = np.where(between > -s, -1, np.where(between < s, 1, 0)).astype(np.int64)
    return p1, p2


def fixed_p_objective(u, split: ClusterSplit, p1, p2, hp: HyperParams) -> float:
    """Convex objective in ``u`` for fixed indicators (without constant terms)."""
    uv = _u_vector(u, split.dim)
    p1, p2 = _check_p(p1, p2, split)
    a = split.Z.T @ uv
    ah = split.Zhat.T @ uv
    lo, hi = -1 + hp.delta, 1 + hp.delta
    return float(0.5 * uv @ uv
                 + hp.c1 * (np.maximum(lo - a, 0).sum() + np.maximum(lo + a, 0).sum())
                 + hp.c2 * (np.maximum(hi - ah, 0).sum() + np.maximum(hi + ah, 0).sum())
                 + hp.c1 * p1 @ a + hp.c2 * p2 @ ah)


def linearization_constant(p1, p2, hp: HyperParams) -> float:
    """Constant separating the fixed-p objective from the ramp objective."""
    return float(hp.c1 * (2 - hp.delta - hp.s) * np.count_nonzero(p1)
                 + hp.c2 * (-hp.s) * np.count_nonzero(p2))


def mixed_objective(u, split: ClusterSplit, p1, p2, hp: HyperParams) -> float:
    return fixed_p_objective(u, split, p1, p2, hp) + linearization_constant(p1, p2, hp)


class _HingeProblem:
    """``0.5|u|^2 + q@u + sum_j c_j (A_j@u + beta_j)_+`` with Huber-smoothed hinges.

    The Huber surrogate of half-width ``eps`` is 0 below ``-eps``, the
    identity above ``eps`` and ``(t + eps)^2 / (4 eps)`` in between; it
    overestimates ``(t)_+`` by at most ``eps / 4``.
    """

    def __init__(self, split: ClusterSplit, p1, p2, hp: HyperParams):
        Zt, Zht = split.Z.T, split.Zhat.T
        lo, hi = -1 + hp.delta, 1 + hp.delta
        self.A = np.vstack([-Zt, Zt, -Zht, Zht])
        self.beta = np.concatenate([np.full(2 * Zt.shape[0], lo),
                                    np.full(2 * Zht.shape[0], hi)])
        self.c = np.concatenate([np.full(2 * Zt.shape[0], hp.c1),
                                 np.full(2 * Zht.shape[0], hp.c2)])
        self.q = hp.c1 * (split.Z @ p1) + hp.c2 * (split.Zhat @ p2)
        self.row_norms = np.linalg.norm(self.A, axis=1)
        self.dim = split.dim

    def exact(self, u: np.ndarray) -> float:
        t = self.A @ u + self.beta
        return float(0.5 * u @ u + self.q @ u + self.c @ np.maximum(t, 0))

    def smoothed(self, u: np.ndarray, eps: float) -> float:
        t = self.A @ u + self.beta
        h = np.where(t >= eps, t, np.where(t <= -eps, 0.0, (t + eps) ** 2 / (4 * eps)))
        return float(0.5 * u @ u + self.q @ u + self.c @ h)

    def derivatives(self, u: np.ndarray, eps: float):
        t = self.A @ u + self.beta
        band = np.abs(t) < eps
        slope = np.where(t >= eps, 1.0, 0.0)
        slope[band] = (t[band] + eps) / (2 * eps)
        grad = u + self.q + self.A.T @ (self.c * slope)
        # rounding floor of the gradient: errors in t are amplified by 1/(2 eps)
        noise = np.finfo(float).eps * (
            np.linalg.norm(u) + np.linalg.norm(self.q) + self.c @ self.row_norms
            + (self.c[band] * self.row_norms[band] * (np.abs(t[band]) + eps + np.abs(self.A[band]) @ np.abs(u))).sum() / (2 * eps))
        return grad, band, 16 * noise

    def best_step(self, u: np.ndarray, d: np.ndarray, eps: float) -> float:
        """Exact minimizer over ``t >= 0`` of the smoothed objective along ``u + t d``."""
        t0 = self.A @ u + self.beta
        sl = self.A @ d
        base_c = u @ d + self.q @ d
        base_s = d @ d
        # derivative of term j along the ray is coef_c + coef_s * t on each piece
        on = t0 >= eps
        band = np.abs(t0) < eps
        cs = self.c * sl
        coef_c = base_c + cs[on].sum() + (cs[band] * (t0[band] + eps)).sum() / (2 * eps)
        coef_s = base_s + (cs[band] * sl[band]).sum() / (2 * eps)

        moving = sl != 0
        with np.errstate(divide="ignore", invalid="ignore"):
            t_lo = np.where(moving, (-eps - t0) / sl, np.inf)
            t_hi = np.where(moving, (eps - t0) / sl, np.inf)
        # events: entering or leaving the band, with the coefficient change they cause
        band_c = cs * (t0 + eps) / (2 * eps)
        band_s = cs * sl / (2 * eps)
        times, dc, ds = [], [], []
        up = sl > 0
        down = sl < 0
        # increasing argument: off -> band at t_lo, band -> on at t_hi
        m = up & (t_lo > 0)
        times.append(t_lo[m]); dc.append(band_c[m]); ds.append(band_s[m])
        m = up & (t_hi > 0)
        times.append(t_hi[m]); dc.append(cs[m] - band_c[m]); ds.append(-band_s[m])
        # decreasing argument: on -> band at t_hi, band -> off at t_lo
        m = down & (t_hi > 0)
        times.append(t_hi[m]); dc.append(band_c[m] - cs[m]); ds.append(band_s[m])
        m = down & (t_lo > 0)
        times.append(t_lo[m]); dc.append(-band_c[m]); ds.append(-band_s[m])
        times = np.concatenate(times)
        dc = np.concatenate(dc)
        ds = np.concatenate(ds)
        order = np.argsort(times, kind="stable")
        times, dc, ds = times[order], dc[order], ds[order]
        C = coef_c + np.concatenate([[0.0], np.cumsum(dc)])
        S = coef_s + np.concatenate([[0.0], np.cumsum(ds)])
        starts = np.concatenate([[0.0], times])
        # derivative at the right end of each piece; the last piece is unbounded
        ends = np.concatenate([times, [np.inf]])
        with np.errstate(invalid="ignore"):
            right = np.where(np.isfinite(ends), C + S * ends, np.inf)
        piece = int(np.argmax(right >= 0))
        if S[piece] <= 0:
            return float(max(starts[piece], 0.0)) or 1.0
        return float(min(max(-C[piece] / S[piece], starts[piece]), ends[piece]))


_F_ROUNDING = 64 * np.finfo(float).eps


def _newton_direction(prob: _HingeProblem, g: np.ndarray, band: np.ndarray, eps: float):
    Ab = prob.A[band]
    curvature = prob.c[band] / (2 * eps)
    if Ab.shape[0] == 0:
        return -g
    if 2 * Ab.shape[0] < prob.dim:
        # Woodbury: (I + Ab' D Ab)^-1 g = g - Ab' (D^-1 + Ab Ab')^-1 Ab g
        small = Ab @ Ab.T
        small[np.diag_indices_from(small)] += 1.0 / curvature
        try:
            return -(g - Ab.T @ np.linalg.solve(small, Ab @ g))
        except np.linalg.LinAlgError:
            pass
    H = (Ab.T * curvature) @ Ab
    H[np.diag_indices_from(H)] += 1.0
    try:
        return -np.linalg.solve(H, g)
    except np.linalg.LinAlgError:
        return -g


def _newton_armijo(prob: _HingeProblem, u: np.ndarray, eps: float, tol: float,
                   max_iter: int, sigma: float = 1e-4, shrink: float = 0.5):
    """Damped Newton on the smoothed objective; returns ``(u, converged)``.

    Backtracking starts from the exact minimizer along the Newton direction.
    Convergence means a gradient norm below ``tol`` or below the rounding
    floor of the gradient evaluation, whichever is larger.
    """
    f = prob.smoothed(u, eps)
    for _ in range(max_iter):
        g, band, floor = prob.derivatives(u, eps)
        gnorm = np.linalg.norm(g)
        if gnorm <= max(tol, floor):
            return u, True
        direction = _newton_direction(prob, g, band, eps)
        slope = g @ direction
        if slope >= 0:
            direction, slope = -g, -(g @ g)
        # the full Newton step usually passes near the solution; otherwise
        # start backtracking from the exact minimizer along the direction
        step = 1.0
        if prob.smoothed(u + direction, eps) > f + sigma * slope + _F_ROUNDING * (1.0 + abs(f)):
            step = prob.best_step(u, direction, eps)
        while True:
            trial = u + step * direction
            f_trial = prob.smoothed(trial, eps)
            # allowance for rounding in f, which dominates near the minimizer
            if f_trial <= f + sigma * step * slope + _F_ROUNDING * (1.0 + abs(f)):
                break
            step *= shrink
            if step < 1e-20:
                # no representable decrease left along a descent direction
                return u, bool(gnorm <= max(tol, 1e3 * floor))
        u, f = trial, f_trial
    g, _, floor = prob.derivatives(u, eps)
    return u, bool(np.linalg.norm(g) <= max(tol, floor))


def _polish_active_set(prob: _HingeProblem, u: np.ndarray, eps: float) -> np.ndarray:
    """Exact minimizer for the hinge pattern seen at a smoothed solution.

    Hinges inside the smoothing band are taken as active (argument exactly
    zero) and hinges above it as linear; the resulting equality-constrained
    quadratic has a closed form. The candidate is kept only if it lowers the
    exact objective, so this step never hurts.
    """
    t = prob.A @ u + prob.beta
    band = np.abs(t) < eps
    on = t >= eps
    g0 = prob.q + prob.A[on].T @ prob.c[on]
    if not band.any():
        cand = -g0
    else:
        Ab = prob.A[band]
        lam = np.linalg.lstsq(Ab @ Ab.T, prob.beta[band] - Ab @ g0, rcond=None)[0]
        cand = -g0 - Ab.T @ lam
    if not np.all(np.isfinite(cand)):
        return u
    return cand if prob.exact(cand) < prob.exact(u) else u


def solve_subproblem(split: ClusterSplit, p1, p2, hp: HyperParams,
                     opts: Optional[SolverOptions] = None, u0=None,
                     return_info: bool = False):
    """Minimize the fixed-indicator objective over ``u``.

    Each hinge ``(t)_+`` is replaced by a Huber quadratic of half-width
    ``opts.smoothing``; the smoothed problem is solved by damped Newton with
    Armijo backtracking. The Hessian is the identity plus a PSD term, so
    every Newton system is positive definite. A final active-set step
    removes the smoothing bias when it lowers the exact objective.

    Returns
    -------
    Plane, or ``(Plane, converged)`` when ``return_info`` is set.
    """
    opts = opts or SolverOptions()
    p1, p2 = _check_p(p1, p2, split)
    prob = _HingeProblem(split, p1, p2, hp)
    u = np.zeros(prob.dim) if u0 is None else _u_vector(u0, prob.dim).copy()

    # the origin is a valid fallback: it may beat a warm start from another p
    if prob.exact(np.zeros(prob.dim)) < prob.exact(u):
        u = np.zeros(prob.dim)
    u, converged = _newton_armijo(prob, u, opts.smoothing, opts.subproblem_tol,
                                  opts.newton_max_iter)
    u = _polish_active_set(prob, u, 10 * opts.smoothing)
    if not converged:
        warnings.warn("Newton-Armijo subproblem solve hit its iteration cap; "
                      "returning the last iterate", ConvergenceWarning, stacklevel=2)
    plane = Plane.from_u(u)
    return (plane, converged) if return_info else plane


def solve_plane_cccp(split: ClusterSplit, hp: HyperParams,
                     opts: Optional[SolverOptions] = None, u0=None):
    """Alternate indicator updates and convex solves for one plane.

    Starting from ``u0`` the indicators are set from the current plane, the
    convex problem for those indicators is solved, and so on. The loop stops
    when the objective decreases by no more than ``opts.objective_tol`` or
    the indicators repeat. A candidate that would increase the objective is
    discarded, so the returned trace is non-increasing.

    Returns
    -------
    plane : Plane
    state : CccpState
    """
    opts = opts or SolverOptions()
    u = np.zeros(split.dim) if u0 is None else _u_vector(u0, split.dim).copy()
    p1, p2 = update_p(u, split, hp.delta, hp.s)
    current = mixed_objective(u, split, p1, p2, hp)
    trace = [current]
    nnz = [(int(np.count_nonzero(p1)), int(np.count_nonzero(p2)))]
    iterations = 0
    converged = False
    all_solves_ok = True

    while iterations < opts.max_iter:
        iterations += 1
        plane, ok = solve_subproblem(split, p1, p2, hp, opts, u, return_info=True)
        all_solves_ok &= ok
        u_new = plane.u
        q1, q2 = update_p(u_new, split, hp.delta, hp.s)
        value = mixed_objective(u_new, split, q1, q2, hp)
        if value > current:
            converged = True
            break
        decrease = current - value
        repeated = np.array_equal(q1, p1) and np.array_equal(q2, p2)
        u, p1, p2, current = u_new, q1, q2, value
        trace.append(current)
        nnz.append((int(np.count_nonzero(p1)), int(np.count_nonzero(p2))))
        if repeated or decrease <= opts.objective_tol:
            converged = True
            break

    if not converged:
        warnings.warn(f"alternating solver reached max_iter={opts.max_iter}",
                      ConvergenceWarning, stacklevel=2)
    state = CccpState(Plane.from_u(u), p1, p2, trace, iterations,
                      converged and all_solves_ok, nnz)
    return state.u, state
