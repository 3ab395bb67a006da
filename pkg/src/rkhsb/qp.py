"""Accelerated projected gradient for ``min u^T G u`` over a box.

Used for the data-dependent term ``c* = min_{|v_i| <= sigma_v} (Y - v)^T G (Y - v)``.
Substituting ``u = Y - v`` gives a convex quadratic over ``[Y - sigma_v, Y + sigma_v]``.

Every feasible point ``u`` yields a certified lower bound on the minimum from
convexity (the Frank-Wolfe / duality-gap bound)::

    q(u*) >= q(u) + min_{w in box} grad q(u) . (w - u)

The solver reports the best such bound, which is what callers that need a
value *below* the true minimum should use.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh

logger = logging.getLogger(__name__)


@dataclass
class BoxQPResult:
    x: np.ndarray            # best feasible point(s), shape (m,) or (m, T)
    value: np.ndarray        # objective at x
    lower_bound: np.ndarray  # certified lower bound on the minimum
    converged: np.ndarray    # per column
    iterations: int


def max_eigenvalue(G):
    """Largest eigenvalue of a symmetric PSD matrix."""
    m = G.shape[0]
    return float(eigh(G, eigvals_only=True, subset_by_index=[m - 1, m - 1])[0])


def minimize_box_quadratic(G, lo, hi, *, lipschitz=None, tol=1e-8, gap_tol=1e-10,
                           max_iter=100_000):
    """Minimize ``u^T G u`` subject to ``lo <= u <= hi``.

    ``lo``/``hi`` may be vectors (one problem) or ``(m, T)`` arrays (T independent
    problems sharing ``G``). Iteration stops per column when the gradient-mapping
    norm drops below ``tol`` or the certified duality gap drops below
    ``gap_tol * max(1, q)``.
    """
    G = np.asarray(G, dtype=float)
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    single = lo.ndim == 1
    if single:
        lo = lo[:, None]
        hi = hi[:, None]
    if np.any(lo > hi):
        raise ValueError("empty box")
    L = 2.0 * (max_eigenvalue(G) if lipschitz is None else lipschitz)
    if L <= 0:
        # G == 0: every point is optimal with value 0
        x = np.clip(0.0, lo, hi)
        z = np.zeros(lo.shape[1])
        return _pack(x, z, z, np.ones_like(z, bool), 0, single)

    def q_and_grad(u):
        Gu = G @ u
        return np.einsum("ij,ij->j", u, Gu), 2.0 * Gu

    def certified(u, q, g, lo, hi):
        # min over the box of g . w, attained at a vertex
        lin = np.einsum("ij,ij->j", g, np.where(g > 0, lo, hi)) - np.einsum("ij,ij->j", g, u)
        return q + lin

    x = np.clip(0.0, lo, hi)
    q, g = q_and_grad(x)
    best_lb = np.maximum(certified(x, q, g, lo, hi), 0.0)
    best_x, best_q = x.copy(), q.copy()
    y = x.copy()
    t = np.ones(x.shape[1])
    active = np.ones(x.shape[1], bool)
    it = 0
    for it in range(1, max_iter + 1):
        cols = np.flatnonzero(active)
        _, gy = q_and_grad(y[:, cols])
        x_new = np.clip(y[:, cols] - gy / L, lo[:, cols], hi[:, cols])
        q_new, g_new = q_and_grad(x_new)
        lb = certified(x_new, q_new, g_new, lo[:, cols], hi[:, cols])

        improved = q_new < best_q[cols]
        best_q[cols[improved]] = q_new[improved]
        best_x[:, cols[improved]] = x_new[:, improved]
        best_lb[cols] = np.maximum(best_lb[cols], lb)

        # adaptive restart when the objective goes up
        restart = q_new > q[cols]
        t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t[cols] ** 2))
        mom = np.where(restart, 0.0, (t[cols] - 1.0) / t_new)
        y[:, cols] = x_new + mom * (x_new - x[:, cols])
        t[cols] = np.where(restart, 1.0, t_new)
        x[:, cols] = x_new
        q[cols] = q_new

        pg = L * np.linalg.norm(x_new - np.clip(x_new - g_new / L, lo[:, cols], hi[:, cols]), axis=0)
        gap = best_q[cols] - best_lb[cols]
        done = (pg <= tol) | (gap <= gap_tol * np.maximum(1.0, best_q[cols]))
        active[cols[done]] = False
        if not active.any():
            break
    converged = ~active
    if active.any():
        logger.warning("box QP: %d of %d problems did not converge in %d iterations",
                       int(active.sum()), active.size, max_iter)
    return _pack(best_x, best_q, np.maximum(best_lb, 0.0), converged, it, single)


def _pack(x, q, lb, conv, it, single):
    if single:
        return BoxQPResult(x[:, 0], q[0], lb[0], conv[0], it)
    return BoxQPResult(x, q, lb, conv, it)
