"""Constrained policy optimisation with a single linearised cost constraint.

Each step solves

    max_x  g'x   s.t.  c + b'x <= 0,   x'Hx / 2 <= eps

with ``H`` the (damped) Fisher matrix, ``g``/``b`` the reward/cost surrogate
gradients and ``c = J_C - d``. With ``q = g'H^-1 g``, ``r = g'H^-1 b`` and
``s = b'H^-1 b`` the Lagrange dual is

    D(lam, nu) = (q - 2 nu r + nu^2 s) / (2 lam) - nu c + lam eps,

minimised over ``lam > 0, nu >= 0``; the primal step is
``x = H^-1 (g - nu b) / lam``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..numkit.optim import backtracking_line_search, conjugate_gradient
from ..numkit.policy import Policy
from .config import InnerLoopConfig
from .trpo import StepInfo, Surrogate, _natural_step, as_batch, trpo_line_search, trpo_step

_EPS = 1e-12


def cpo_dual_value(lam, nu, q, r, s, c, eps):
    return (q - 2.0 * nu * r + nu * nu * s) / (2.0 * lam) - nu * c + lam * eps


@dataclass
class CpoDual:
    case: str  # "inactive" | "active" | "recovery"
    lam: float
    nu: float


def solve_cpo_dual(q, r, s, c, eps) -> CpoDual:
    """Closed-form minimiser of the dual over ``lam > 0, nu >= 0``.

    For fixed ``lam`` the optimal ``nu`` is ``max(0, (r + lam c) / s)``. On the
    ``nu > 0`` branch ``D = A / (2 lam) + lam B / 2 - r c / s`` with
    ``A = q - r^2/s`` and ``B = 2 eps - c^2/s``; on the ``nu = 0`` branch
    ``D = q / (2 lam) + lam eps``. Each branch is minimised over its interval
    of ``lam`` and the lower value wins. ``B < 0`` with ``c > 0`` means no
    point of the trust region satisfies the constraint.
    """
    A = max(q - r * r / s, 0.0)
    B = 2.0 * eps - c * c / s
    if c > 0 and B < 0:
        return CpoDual("recovery", np.nan, np.nan)
    # nu > 0 exactly on lam * c + r > 0
    if c > _EPS:
        a_lo, a_hi = max(0.0, -r / c), np.inf
        b_lo, b_hi = 0.0, max(0.0, -r / c)
    elif c < -_EPS:
        a_lo, a_hi = 0.0, max(0.0, -r / c)
        b_lo, b_hi = max(0.0, -r / c), np.inf
    else:
        a_lo, a_hi, b_lo, b_hi = (0.0, np.inf, 0.0, 0.0) if r > 0 else (0.0, 0.0, 0.0, np.inf)
    candidates = []
    if a_hi > a_lo and B > 0:
        lam_a = np.clip(np.sqrt(A / B) if A > 0 else a_lo, a_lo, a_hi)
        lam_a = max(lam_a, _EPS)
        nu_a = max(0.0, (r + lam_a * c) / s)
        candidates.append((cpo_dual_value(lam_a, nu_a, q, r, s, c, eps), lam_a, nu_a))
    if b_hi > b_lo:
        lam_b = max(np.clip(np.sqrt(q / (2.0 * eps)), b_lo, b_hi), _EPS)
        candidates.append((cpo_dual_value(lam_b, 0.0, q, r, s, c, eps), lam_b, 0.0))
    if not candidates:
        return CpoDual("recovery", np.nan, np.nan)
    _, lam, nu = min(candidates)
    return CpoDual("active" if nu > 0 else "inactive", float(lam), float(nu))


def cpo_step(policy: Policy, params, data, reward_advantages, cost_advantages, J_C, d,
             cfg: InnerLoopConfig = InnerLoopConfig(), cost_gamma=None):
    """One CPO update; returns ``(new_params, StepInfo)``.

    The cost surrogate is ``(1/N_ep) sum_i gamma_c^t_i (ratio_i - 1) A_C,i``, the
    linearisation of the per-episode cost return measured like ``J_C``.
    ``cost_gamma=None`` weights every step equally.
    """
    batch = as_batch(data)
    sur = Surrogate(policy, params, batch)
    w_r = np.asarray(reward_advantages, dtype=float) / len(batch)
    disc = np.ones(len(batch)) if cost_gamma is None else cost_gamma ** batch.t
    w_c = disc * np.asarray(cost_advantages, dtype=float) / batch.n_episodes
    c = float(J_C) - float(d)
    b = sur.grad(w_c)
    b_norm = float(np.linalg.norm(b))
    if b_norm < 1e-8:
        if c <= 0:
            new, info = trpo_step(policy, params, batch, reward_advantages, cfg, surrogate=sur)
            info.case = "trpo_fallback"
            return new, info
        return sur.params.copy(), StepInfo(False, 0.0, 0.0, 0, "stuck_infeasible")

    g = sur.grad(w_r)
    fvp = sur.fvp(cfg.damping)
    eps = cfg.kl_threshold
    # the plain trust-region step already satisfying the linear constraint means
    # the constraint is inactive: defer to TRPO entirely
    g_any = bool(np.any(g))
    if not g_any and c <= 0:
        return sur.params.copy(), StepInfo(False, 0.0, 0.0, 0, "zero_gradient")
    if g_any:
        x_trpo = _natural_step(sur, g, cfg)
        if x_trpo is not None and c + float(b @ x_trpo) <= 0.0:
            new, info = trpo_line_search(sur, x_trpo, w_r, cfg, case="inactive")
            info.cost_change = sur.change(new, w_c)
            return new, info

    Hb = conjugate_gradient(fvp, b, iters=cfg.cg_iters)
    s = float(b @ Hb)
    if g_any:
        Hg = conjugate_gradient(fvp, g, iters=cfg.cg_iters)
        q, r = float(g @ Hg), float(g @ Hb)
    else:
        Hg, q, r = np.zeros_like(g), 0.0, 0.0
    dual = solve_cpo_dual(q, r, s, c, eps) if s > _EPS else CpoDual("recovery", np.nan, np.nan)
    if dual.case == "recovery" or not g_any:
        full = -np.sqrt(2.0 * eps / max(s, _EPS)) * Hb
        case = "recovery"
    else:
        full = (Hg - dual.nu * Hb) / dual.lam
        case = dual.case
    limit = cfg.kl_slack * eps
    allowed = max(-c, 0.0)

    def accept(step):
        new = sur.params + step
        kl = sur.kl(new)
        imp = sur.change(new, w_r)
        dc = sur.change(new, w_c)
        if case == "recovery":
            ok = kl <= limit and dc < 0.0
        else:
            ok = kl <= limit and dc <= allowed and (imp > 0.0 or c > 0)
        return ok, (imp, kl, dc)

    step, info, k = backtracking_line_search(accept, full, cfg.backtrack_coeff, cfg.backtrack_limit)
    if step is None:
        return sur.params.copy(), StepInfo(False, 0.0, 0.0, k, case)
    imp, kl, dc = info
    return sur.params + step, StepInfo(True, kl, imp, k, case, dc)
