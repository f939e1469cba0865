"""Learner versus exact optimum on a small grid-hazard CMDP.

Builds one 5x5 grid task with a binding cost limit, solves it exactly with
the occupancy-measure LP, then adapts a zero-initialised softmax policy with
TRPO-Lagrangian and with CPO and compares both to the LP answer.

    python demos/tabular_oracle.py
"""
from dataclasses import replace

from cmaml.envs import catalog
from cmaml.harness.experiments import oracle_check_config, oracle_task_outcome
from cmaml.oracle import solve_cmdp_lp

cfg = oracle_check_config()
task = catalog(replace(cfg.env, count=1))[0]
print(f"task {task.task_id}: {task.state_count} states, cost limit d = {task.cost_limit:.4f}")
sol = solve_cmdp_lp(task)
print(f"LP optimum: return {sol.optimal_return:.4f} at discounted cost {sol.optimal_cost:.4f}")

for algorithm in ("trpo_lag", "cpo"):
    outcome = oracle_task_outcome(cfg, task, algorithm, seed=0)
    print(outcome.line())
    print(f"  accepted steps: {len(outcome.kls)}, largest KL {max(outcome.kls):.4f} "
          f"(trust region {cfg.inner.kl_threshold})")
