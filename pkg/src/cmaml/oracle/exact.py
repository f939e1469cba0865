"""Exact solutions for tabular CMDPs: occupancy LP, policy evaluation, policy gradients."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..envs.tabular import TabularCmdp
from ..numkit.distributions import softmax
from .simplex import simplex


@dataclass
class ExactSolution:
    feasible: bool
    optimal_return: float
    optimal_cost: float
    optimal_occupancy: np.ndarray | None
    optimal_policy: np.ndarray | None

    def to_text(self) -> str:
        lines = [f"feasible {self.feasible}", f"optimal_return {self.optimal_return!r}",
                 f"optimal_cost {self.optimal_cost!r}"]
        if self.optimal_policy is not None:
            for s, row in enumerate(self.optimal_policy):
                lines.append(f"pi {s} " + " ".join(repr(float(p)) for p in row))
        return "\n".join(lines) + "\n"


@dataclass
class ExactValues:
    V: np.ndarray
    Q: np.ndarray
    A: np.ndarray
    V_C: np.ndarray
    Q_C: np.ndarray
    A_C: np.ndarray
    occupancy: np.ndarray  # unnormalised discounted visitation, sums to 1 / (1 - gamma)
    J: float
    J_C: float


def _gamma(task, gamma):
    gamma = task.gamma if gamma is None else float(gamma)
    if not 0.0 <= gamma < 1.0:
        raise ValueError("exact evaluation needs 0 <= gamma < 1")
    return gamma


def policy_from_occupancy(x):
    """``pi(a|s) = x(s,a) / sum_a x(s,a)``; zero-occupancy states get the uniform policy."""
    x = np.asarray(x, dtype=float)
    mass = x.sum(axis=1, keepdims=True)
    uniform = np.full_like(x, 1.0 / x.shape[1])
    with np.errstate(invalid="ignore", divide="ignore"):
        pi = np.where(mass > 1e-12, x / np.where(mass > 0, mass, 1.0), uniform)
    return pi / pi.sum(axis=1, keepdims=True)


def _flow_constraints(task: TabularCmdp, gamma):
    S, A = task.state_count, task.action_count
    # sum_a x(s,a) - gamma * sum_{s',a'} M[s',a',s] x(s',a') = mu(s)
    E = np.zeros((S, S * A))
    for s in range(S):
        E[s, s * A:(s + 1) * A] = 1.0
    E -= gamma * task.M.reshape(S * A, S).T
    return E, task.mu.copy()


def solve_cmdp_lp(task: TabularCmdp, d=None, gamma=None) -> ExactSolution:
    """Constrained optimum via the discounted occupancy-measure LP."""
    gamma = _gamma(task, gamma)
    d = task.cost_limit if d is None else float(d)
    S, A = task.state_count, task.action_count
    if S * A >= 10_000:
        raise ValueError("occupancy LP is only meant for small tasks")
    r = task.expected_reward().ravel()
    c = task.expected_cost().ravel()
    E, mu = _flow_constraints(task, gamma)
    if np.isfinite(d):
        A_eq = np.vstack([np.hstack([E, np.zeros((S, 1))]), np.append(c, 1.0)[None, :]])
        b_eq = np.append(mu, d)
        obj = np.append(-r, 0.0)
    else:
        A_eq, b_eq, obj = E, mu, -r
    res = simplex(obj, A_eq, b_eq)
    if res.status != "optimal":
        return ExactSolution(False, np.nan, np.nan, None, None)
    x = res.x[:S * A].reshape(S, A)
    return ExactSolution(True, float(r @ x.ravel()), float(c @ x.ravel()), x, policy_from_occupancy(x))


def minimum_cost(task: TabularCmdp, gamma=None) -> float:
    """Smallest achievable discounted cost (the LP with the cost as objective)."""
    gamma = _gamma(task, gamma)
    E, mu = _flow_constraints(task, gamma)
    res = simplex(task.expected_cost().ravel(), E, mu)
    return float(res.objective)


def exact_policy_eval(task: TabularCmdp, policy, gamma=None) -> ExactValues:
    gamma = _gamma(task, gamma)
    pi = np.asarray(policy, dtype=float)
    S = task.state_count
    P = np.einsum("sa,sap->sp", pi, task.M)
    I = np.eye(S)
    r_sa, c_sa = task.expected_reward(), task.expected_cost()
    V = np.linalg.solve(I - gamma * P, np.sum(pi * r_sa, axis=1))
    V_C = np.linalg.solve(I - gamma * P, np.sum(pi * c_sa, axis=1))
    Q = r_sa + gamma * task.M @ V
    Q_C = c_sa + gamma * task.M @ V_C
    occ = np.linalg.solve((I - gamma * P).T, task.mu)
    return ExactValues(V, Q, Q - V[:, None], V_C, Q_C, Q_C - V_C[:, None], occ,
                       float(task.mu @ V), float(task.mu @ V_C))


def exact_policy_gradient(task: TabularCmdp, logits, gamma=None, lam=0.0):
    """Gradient of ``J - lam * J_C`` w.r.t. softmax logits ``(S, A)``.

    ``d/dtheta(s,a) = rho(s) * pi(a|s) * (A(s,a) - lam * A_C(s,a))`` with ``rho``
    the unnormalised discounted state occupancy.
    """
    pi = softmax(np.asarray(logits, dtype=float))
    ev = exact_policy_eval(task, pi, gamma)
    return ev.occupancy[:, None] * pi * (ev.A - lam * ev.A_C)


def value_iteration(task: TabularCmdp, gamma=None, tol=1e-12, max_iter=100_000):
    """Unconstrained optimum: ``(V*, greedy deterministic policy)``."""
    gamma = _gamma(task, gamma)
    r_sa = task.expected_reward()
    V = np.zeros(task.state_count)
    for _ in range(max_iter):
        Q = r_sa + gamma * task.M @ V
        V_new = Q.max(axis=1)
        if np.max(np.abs(V_new - V)) < tol:
            V = V_new
            break
        V = V_new
    Q = r_sa + gamma * task.M @ V
    pi = np.zeros_like(Q)
    pi[np.arange(len(Q)), Q.argmax(axis=1)] = 1.0
    return V, pi


def binding_cost_limit(task: TabularCmdp, fraction=0.3, gamma=None):
    """``(d, c_min, c_free)`` with ``d`` a fraction of the way from the minimum cost
    to the cost of the unconstrained optimum."""
    c_min = minimum_cost(task, gamma)
    c_free = solve_cmdp_lp(task, np.inf, gamma).optimal_cost
    return c_min + fraction * (c_free - c_min), c_min, c_free
