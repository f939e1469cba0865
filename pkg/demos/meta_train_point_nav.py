"""A short C-MAML run on point navigation, followed by fine-tuning.

Meta-trains for a handful of outer iterations on env2-like tasks (10
hazards, 10 vases, cost limit 5 per episode), prints how the meta-policy's
return, cost and the two multipliers move, then fine-tunes the result on
held-out tasks and writes return/cost plots next to the metrics.

    python demos/meta_train_point_nav.py [output_dir]
"""
import os
import sys

from cmaml.harness.config import ExperimentConfig, apply_overrides
from cmaml.harness.experiments import cmd_finetune, cmd_meta_train
from cmaml.harness.metrics import read_csv

here = os.path.dirname(os.path.abspath(__file__))
cfg = ExperimentConfig.load(os.path.join(here, "..", "configs", "eta_ablation.txt"))
cfg = apply_overrides(cfg, [
    ("experiment.name", "demo"), ("experiment.seeds", "(0,)"),
    ("experiment.output_dir", sys.argv[1] if len(sys.argv) > 1 else "runs"),
    ("outer.N", "15"), ("finetune.tasks", "4"), ("finetune.steps", "5"),
])

result = cmd_meta_train(cfg)
print(f"meta-training written to {result['out_dir']}")
for row in read_csv(result["metrics"]):
    if row["task_id"] == "agg" and row["iteration"] % 3 == 0:
        print(f"  iteration {row['iteration']:3d}: return {row['mean_episode_return']:6.2f} "
              f"cost {row['mean_episode_cost']:5.2f}  lambda {row['lambda']:.3f}  eta {row['eta']:.3f}")
ret, cost = result["final"][0]
print(f"final meta-policy on the training tasks: return {ret:.2f}, cost {cost:.2f} (d = {cfg.env.cost_limit})")

ft = cmd_finetune(cfg, os.path.join(result["out_dir"], "seed0.ckpt"))
print(f"fine-tuning written to {ft['out_dir']}")
for row in read_csv(ft["metrics"]):
    if row["task_id"] == "agg":
        print(f"  step {row['iteration']}: return {row['mean_episode_return']:6.2f} cost {row['mean_episode_cost']:5.2f}")
