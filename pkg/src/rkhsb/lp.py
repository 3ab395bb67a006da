"""Linear programs ``min c^T x  s.t.  A x <= b,  0 <= x <= u``.

Small problems are solved with a dense two-phase tableau simplex using Bland's
rule, so it cannot cycle. Large sparse problems (thousands of variables and
hundreds of thousands of rows, as produced by fine partitions) go to HiGHS
through :func:`scipy.optimize.linprog`.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy import sparse

logger = logging.getLogger(__name__)

# tableau entries (rows x columns) above which "auto" switches to HiGHS
DENSE_LIMIT = 200_000
PIVOT_TOL = 1e-9


@dataclass
class LPResult:
    x: np.ndarray | None
    objective: float
    status: str          # "optimal", "iteration_limit" or "infeasible"
    iterations: int
    method: str

    @property
    def ok(self):
        return self.status == "optimal"


def solve_lp(c, A, b, upper, *, method="auto", max_iter=50_000):
    """Minimize ``c @ x`` subject to ``A @ x <= b`` and ``0 <= x <= upper``.

    ``A`` may be dense or a scipy sparse matrix. ``method`` is ``"simplex"``,
    ``"highs"`` or ``"auto"`` (simplex when the dense tableau is small).
    On an iteration cap the simplex returns its last feasible vertex, if any,
    with status ``"iteration_limit"``.
    """
    c = np.asarray(c, dtype=float)
    b = np.asarray(b, dtype=float)
    upper = np.broadcast_to(np.asarray(upper, dtype=float), c.shape)
    n_rows = b.shape[0] + c.shape[0]
    n_cols = 2 * c.shape[0] + 2 * b.shape[0]
    if method == "auto":
        method = "simplex" if n_rows * n_cols <= DENSE_LIMIT else "highs"
    if method == "highs":
        return _solve_highs(c, A, b, upper)
    if method != "simplex":
        raise ValueError(f"unknown LP method {method!r}")
    A = A.toarray() if sparse.issparse(A) else np.asarray(A, dtype=float)
    return simplex(c, A, b, upper, max_iter=max_iter)


def _solve_highs(c, A, b, upper):
    from scipy.optimize import linprog

    res = linprog(c, A_ub=sparse.csr_matrix(A), b_ub=b,
                  bounds=np.column_stack([np.zeros_like(upper), upper]), method="highs")
    if res.status == 0:
        return LPResult(res.x, float(res.fun), "optimal", int(res.nit), "highs")
    if res.status == 1:
        x = res.x if res.x is not None and np.all(np.isfinite(res.x)) else None
        return LPResult(x, float("nan") if x is None else float(c @ x), "iteration_limit",
                        int(res.nit), "highs")
    if res.status == 2:
        return LPResult(None, float("nan"), "infeasible", int(res.nit), "highs")
    raise ArithmeticError(f"HiGHS failed: {res.message}")


def simplex(c, A, b, upper, *, max_iter=50_000):
    """Dense two-phase tableau simplex with Bland's rule.

    Upper bounds become explicit rows. Every row gets a slack; rows with a
    negative right-hand side are negated and get an artificial variable that
    phase 1 drives out.
    """
    n = c.shape[0]
    A_full = np.vstack([A, np.eye(n)])
    b_full = np.concatenate([b, upper])
    m = A_full.shape[0]
    neg = b_full < 0
    sign = np.where(neg, -1.0, 1.0)
    n_art = int(neg.sum())

    # columns: x (n) | slacks (m) | artificials (n_art) | rhs
    T = np.zeros((m, n + m + n_art + 1))
    T[:, :n] = A_full * sign[:, None]
    T[np.arange(m), n + np.arange(m)] = sign
    art_rows = np.flatnonzero(neg)
    T[art_rows, n + m + np.arange(n_art)] = 1.0
    T[:, -1] = b_full * sign
    basis = n + np.arange(m)
    basis[art_rows] = n + m + np.arange(n_art)

    iters = 0
    if n_art:
        cost = np.zeros(n + m + n_art)
        cost[n + m:] = 1.0
        status, k = _run(T, basis, cost, max_iter)
        iters += k
        if status == "iteration_limit":
            return LPResult(None, float("nan"), status, iters, "simplex")
        if _objective(T, basis, cost) > 1e-9 * max(1.0, np.abs(b_full).max()):
            return LPResult(None, float("nan"), "infeasible", iters, "simplex")
        _drive_out_artificials(T, basis, n + m)
        T = np.delete(T, np.s_[n + m:n + m + n_art], axis=1)

    cost = np.concatenate([c, np.zeros(m)])
    status, k = _run(T, basis, cost, max_iter - iters)
    iters += k
    x = np.zeros(n + m)
    x[basis] = T[:, -1]
    x = np.clip(x[:n], 0.0, upper)
    return LPResult(x, float(c @ x), status, iters, "simplex")


def _objective(T, basis, cost):
    return float(cost[basis] @ T[:, -1])


def _run(T, basis, cost, max_iter):
    n_var = T.shape[1] - 1
    for it in range(max(max_iter, 0)):
        reduced = cost[:n_var] - cost[basis] @ T[:, :n_var]
        entering = np.flatnonzero(reduced < -PIVOT_TOL)
        if entering.size == 0:
            return "optimal", it
        col = entering[0]  # Bland: smallest index
        pivot_col = T[:, col]
        rows = np.flatnonzero(pivot_col > PIVOT_TOL)
        if rows.size == 0:
            # cannot happen with every variable bounded
            raise ArithmeticError("unbounded LP")
        ratios = T[rows, -1] / pivot_col[rows]
        best = ratios.min()
        tied = rows[ratios <= best + 1e-12 * max(1.0, abs(best))]
        row = tied[np.argmin(basis[tied])]  # Bland tie-break on leaving variable
        _pivot(T, row, col)
        basis[row] = col
    logger.warning("simplex stopped at the iteration cap (%d)", max_iter)
    return "iteration_limit", max(max_iter, 0)


def _pivot(T, row, col):
    T[row] /= T[row, col]
    factors = T[:, col].copy()
    factors[row] = 0.0
    T -= np.outer(factors, T[row])


def _drive_out_artificials(T, basis, first_art):
    # degenerate artificials left in the basis at value 0
    for row in np.flatnonzero(basis >= first_art):
        cols = np.flatnonzero(np.abs(T[row, :first_art]) > PIVOT_TOL)
        if cols.size:
            _pivot(T, row, cols[0])
            basis[row] = cols[0]
