"""Solvers and optimisers used by the policy updates."""
from __future__ import annotations

import numpy as np


class NumericError(ArithmeticError):
    pass


def conjugate_gradient(matvec, b, iters=10, tol=1e-10, return_residuals=False):
    """Solve ``A x = b`` for symmetric positive-definite ``A`` given as ``matvec``.

    Stops once ``||A x - b|| <= tol * ||b||`` or after ``iters`` iterations.
    """
    b = np.asarray(b, dtype=float)
    x = np.zeros_like(b)
    r = b.copy()
    p = r.copy()
    rr = float(r @ r)
    b_norm = np.sqrt(rr)
    residuals = [b_norm]
    if b_norm == 0.0:
        return (x, residuals) if return_residuals else x
    for _ in range(iters):
        Ap = np.asarray(matvec(p), dtype=float)
        pAp = float(p @ Ap)
        if not np.isfinite(pAp) or pAp <= 0.0:
            if not np.isfinite(pAp):
                raise NumericError("non-finite curvature in conjugate gradient")
            break
        alpha = rr / pAp
        x = x + alpha * p
        r = r - alpha * Ap
        rr_new = float(r @ r)
        if not np.isfinite(rr_new):
            raise NumericError("non-finite residual in conjugate gradient")
        residuals.append(np.sqrt(rr_new))
        if np.sqrt(rr_new) <= tol * b_norm:
            break
        p = r + (rr_new / rr) * p
        rr = rr_new
    return (x, residuals) if return_residuals else x


def backtracking_line_search(accept, full_step, coeff=0.8, max_trials=10):
    """Try ``full_step * coeff**k`` for ``k = 0..max_trials-1``.

    ``accept(step)`` returns ``(ok, info)``. Returns ``(step, info, k)`` for the
    first accepted trial, or ``(None, info_of_last_trial, max_trials)``.
    """
    info = None
    for k in range(max_trials):
        step = full_step * coeff ** k
        ok, info = accept(step)
        if ok:
            return step, info, k
    return None, info, max_trials


class Adam:
    """Plain Adam over a flat vector; state lives on the instance."""

    def __init__(self, size, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = np.zeros(size)
        self.v = np.zeros(size)
        self.t = 0

    def step(self, params, grad):
        """Return updated params for a *descent* step along ``grad``."""
        self.t += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1 - self.beta2) * grad * grad
        m_hat = self.m / (1 - self.beta1 ** self.t)
        v_hat = self.v / (1 - self.beta2 ** self.t)
        return params - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)
