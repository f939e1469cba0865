"""Two-phase revised simplex with Bland's anti-cycling rule.

Pivots use the steepest reduced cost until five consecutive degenerate
pivots occur, then fall back to Bland's smallest-index rule, which cannot cycle.

Solves ``min c @ x  s.t.  A @ x = b, x >= 0`` for small dense problems. The
basis matrix is refactorised from scratch every pivot, which is plenty for the
few hundred variables of a tabular occupancy LP.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class LpResult:
    status: str  # "optimal" | "infeasible" | "unbounded"
    x: np.ndarray | None
    objective: float
    iterations: int


def _simplex_phase(A, b, c, basis, tol, max_iter):
    m, n = A.shape
    basis = list(basis)
    col_norms = np.abs(A).sum(axis=0)
    degenerate_run = 0
    for it in range(max_iter):
        B = A[:, basis]
        x_B = np.linalg.solve(B, b)
        y = np.linalg.solve(B.T, c[basis])
        reduced = c - A.T @ y
        scale = 1.0 + np.abs(c) + col_norms * np.max(np.abs(y))
        in_basis = np.zeros(n, dtype=bool)
        in_basis[basis] = True
        candidates = np.flatnonzero((reduced < -tol * scale) & ~in_basis)
        if candidates.size == 0:
            x = np.zeros(n)
            x[basis] = x_B
            return "optimal", x, basis, it
        if degenerate_run >= 5:
            q = int(candidates[0])
        else:
            q = int(candidates[np.argmin(reduced[candidates] / scale[candidates])])
        d = np.linalg.solve(B, A[:, q])
        rows = np.flatnonzero(d > max(tol, 1e-7 * np.max(np.abs(d))))
        if rows.size == 0:
            return "unbounded", None, basis, it
        ratios = np.maximum(x_B[rows], 0.0) / d[rows]
        best = ratios.min()
        ties = rows[ratios <= best + tol * max(1.0, abs(best))]
        leave = min(ties, key=lambda i: basis[i])
        degenerate_run = degenerate_run + 1 if best <= tol else 0
        basis[leave] = q
    raise RuntimeError("simplex iteration limit reached")


def simplex(c, A_eq, b_eq, tol=1e-9, max_iter=50_000) -> LpResult:
    A = np.array(A_eq, dtype=float)
    b = np.array(b_eq, dtype=float)
    c = np.asarray(c, dtype=float)
    # identical columns (e.g. every action of an absorbing state) only invite
    # degenerate pivots; solve with one representative of each
    _, first = np.unique(np.vstack([A, c]).T, axis=0, return_index=True)
    if len(first) < A.shape[1]:
        keep_cols = np.sort(first)
        res = simplex(c[keep_cols], A[:, keep_cols], b, tol, max_iter)
        if res.x is not None:
            x = np.zeros(A.shape[1])
            x[keep_cols] = res.x
            res.x = x
        return res
    m, n = A.shape
    neg = b < 0
    A[neg] *= -1
    b[neg] *= -1

    # phase 1: artificial variables n..n+m-1 form the starting basis
    A1 = np.hstack([A, np.eye(m)])
    c1 = np.concatenate([np.zeros(n), np.ones(m)])
    status, x1, basis, it1 = _simplex_phase(A1, b, c1, range(n, n + m), tol, max_iter)
    if status != "optimal" or x1[n:].sum() > 1e-7 * max(1.0, b.sum()):
        return LpResult("infeasible", None, np.nan, it1)

    # pivot zero-level artificials out of the basis; drop redundant rows
    rows = list(range(m))
    for pos in range(m):
        var = basis[pos]
        if var < n:
            continue
        B = A1[:, basis]
        row_of_inv = np.linalg.solve(B.T, np.eye(m)[pos])
        alpha = row_of_inv @ A
        alpha[[v for v in basis if v < n]] = 0.0
        j = int(np.argmax(np.abs(alpha)))
        if abs(alpha[j]) > tol:
            basis[pos] = j
        else:
            rows.remove(pos)
    keep = [p for p in range(m) if p in rows]
    basis = [basis[p] for p in keep]
    A2, b2 = A[keep], b[keep]

    status, x, basis, it2 = _simplex_phase(A2, b2, c, basis, tol, max_iter)
    if status != "optimal":
        return LpResult(status, None, -np.inf, it1 + it2)
    x = np.maximum(x, 0.0)
    return LpResult("optimal", x, float(c @ x), it1 + it2)
