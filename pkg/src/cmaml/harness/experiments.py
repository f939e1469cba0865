"""Experiment commands: meta-training, fine-tuning, four-way comparison, eta ablation, oracle check.

Each command writes into a fresh output directory holding ``config.txt``
(the resolved configuration), ``config.sha1`` (its git-style content hash),
metrics CSVs, SVG plots and a plain-text summary.
"""
from __future__ import annotations

import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from ..envs.base import rollouts
from ..envs.distribution import catalog
from ..meta.checkpoint import MetaCheckpoint
from ..meta.train import fine_tune, meta_train, policy_for, policy_from_checkpoint
from ..numkit.distributions import softmax
from ..numkit.mlp import raw_forward
from ..oracle.exact import exact_policy_eval, solve_cmdp_lp
from ..rng import stream
from ..safe_rl.adapt import adapt_task, critic_spec_for
from .config import ExperimentConfig
from .metrics import aggregate, append_rows, make_row
from .plots import emit_plots, render_svg, series_from_rows

INITS = ("random", "pretrained", "maml", "cmaml")
INIT_MODES = {"random": "random", "pretrained": "pretrain_single", "maml": "maml_unconstrained",
              "cmaml": "cmaml"}


def unique_dir(path) -> str:
    """``path`` itself if unused, else the first free ``path-1``, ``path-2``, ..."""
    if not os.path.exists(path):
        os.makedirs(path)
        return path
    k = 1
    while os.path.exists(f"{path}-{k}"):
        k += 1
    os.makedirs(f"{path}-{k}")
    return f"{path}-{k}"


def prepare_output(cfg: ExperimentConfig, out_dir=None, command="run") -> str:
    base = out_dir or os.path.join(cfg.experiment.output_dir, f"{cfg.experiment.name}-{command}")
    path = unique_dir(base)
    _write(os.path.join(path, "config.txt"), cfg.to_text())
    _write(os.path.join(path, "config.sha1"), cfg.content_hash() + "\n")
    return path


def _write(path, text):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(text)


class _Clock:
    def __init__(self, enabled):
        self.enabled = enabled
        self.t0 = time.perf_counter()
        self.log = []

    def now(self):
        return time.perf_counter() - self.t0 if self.enabled else 0.0

    def mark(self, what):
        self.log.append(f"{what}\t{time.perf_counter() - self.t0:.3f}\n")

    def save(self, out_dir):
        _write(os.path.join(out_dir, "timings.txt"), "".join(self.log))


def _map(fn, jobs, workers):
    """Ordered map; a pool only when ``workers > 1`` (results come back in job order)."""
    if workers <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs))


# --- meta-training ------------------------------------------------------------------------

def train_checkpoint(cfg: ExperimentConfig, seed: int, mode=None):
    """Meta-train under ``mode`` (default: the config's baseline mode)."""
    outer = cfg.outer if mode is None else replace(cfg.outer, baseline_mode=mode)
    return meta_train(cfg.env, cfg.inner, outer, seed)


def evaluate_policy(ckpt: MetaCheckpoint, tasks, episodes, seed):
    """Mean undiscounted episode return and cost of the checkpoint policy over ``tasks``."""
    policy = policy_from_checkpoint(ckpt)
    R, C = [], []
    for task in tasks:
        for tr in rollouts(task, policy, ckpt.policy_params, stream(seed, "evaluate", task.task_id),
                           episodes):
            R.append(tr.episode_return)
            C.append(tr.episode_cost)
    return float(np.mean(R)), float(np.mean(C))


def final_meta_evaluation(cfg, ckpt, seed, episodes=10):
    return evaluate_policy(ckpt, cfg.env.split("train").tasks(), episodes, seed)


def _meta_rows(rows, seed, clock):
    return [make_row(r, seed, clock.now()) for r in rows]


def cmd_meta_train(cfg: ExperimentConfig, out_dir=None) -> dict:
    """Meta-train once per seed; writes ``seed<k>.ckpt``, ``metrics.csv``, ``summary.txt``, ``meta.svg``."""
    out = prepare_output(cfg, out_dir, "meta-train")
    clock = _Clock(cfg.experiment.record_wall_clock)
    csv_path = os.path.join(out, "metrics.csv")
    lines = ["seed\tfinal_return\tfinal_cost\tlambda\teta\n"]
    finals = {}
    for seed in cfg.experiment.seeds:
        ckpt, rows, _ = train_checkpoint(cfg, seed)
        clock.mark(f"meta_train seed {seed}")
        ckpt.save(os.path.join(out, f"seed{seed}.ckpt"))
        append_rows(csv_path, _meta_rows(rows, seed, clock))
        ret, cost = final_meta_evaluation(cfg, ckpt, seed)
        finals[seed] = (ret, cost)
        lines.append(f"{seed}\t{ret!r}\t{cost!r}\t{ckpt.lam!r}\t{ckpt.eta!r}\n")
    if not os.path.exists(csv_path):
        append_rows(csv_path, [])
    _write(os.path.join(out, "summary.txt"), "".join(lines))
    emit_plots(csv_path, os.path.join(out, "meta.svg"), _plot_limit(cfg), "meta-training")
    clock.save(out)
    return {"out_dir": out, "metrics": csv_path, "final": finals}


def _plot_limit(cfg):
    return cfg.env.cost_limit


# --- fine-tuning -----------------------------------------------------------------------------

def finetune_tasks(cfg: ExperimentConfig):
    part = "heldout" if cfg.env.holdout > 0 else "all"
    tasks = cfg.env.split(part).tasks()
    if cfg.finetune.tasks > len(tasks):
        raise ValueError(f"finetune.tasks={cfg.finetune.tasks} but only {len(tasks)} {part} tasks exist")
    return tasks[:cfg.finetune.tasks]


@dataclass
class _FineTuneJob:
    ckpt_bytes: bytes
    task: object
    inner: object
    steps: int
    seed: int
    record: bool = False
    extra: dict = field(default_factory=dict)


def _run_finetune_job(job: _FineTuneJob):
    ckpt = MetaCheckpoint.from_bytes(job.ckpt_bytes)
    policy = policy_from_checkpoint(ckpt)
    t0 = time.perf_counter()
    rows, _ = fine_tune(policy, ckpt.policy_params, job.task, job.inner, job.steps,
                        stream(job.seed, "finetune", job.task.task_id), lam_init=ckpt.lam,
                        cost_critic=ckpt.cost_critic)
    elapsed = time.perf_counter() - t0 if job.record else 0.0
    return [make_row(r, job.seed, elapsed) for r in rows]


def finetune_rows(cfg: ExperimentConfig, ckpt: MetaCheckpoint, seed: int, tasks=None):
    """Per-task fine-tuning rows followed by the ``agg`` mean and ``agg_std`` rows."""
    tasks = finetune_tasks(cfg) if tasks is None else tasks
    inner = replace(cfg.inner, algorithm=cfg.finetune.algorithm)
    blob = ckpt.to_bytes()
    jobs = [_FineTuneJob(blob, t, inner, cfg.finetune.steps, seed, cfg.experiment.record_wall_clock)
            for t in sorted(tasks, key=lambda t: t.task_id)]
    per_task = [r for rows in _map(_run_finetune_job, jobs, cfg.experiment.workers) for r in rows]
    means, stds = aggregate(per_task)
    return per_task + means + stds


def load_init(cfg: ExperimentConfig, init, seed):
    """``random`` builds a fresh initialisation; anything else is a checkpoint path."""
    if init == "random":
        return train_checkpoint(cfg, seed, "random")[0]
    return MetaCheckpoint.load(init)


def cmd_finetune(cfg: ExperimentConfig, init="random", out_dir=None) -> dict:
    out = prepare_output(cfg, out_dir, "finetune")
    clock = _Clock(cfg.experiment.record_wall_clock)
    csv_path = os.path.join(out, "metrics.csv")
    for seed in cfg.experiment.seeds:
        ckpt = load_init(cfg, init, seed)
        append_rows(csv_path, finetune_rows(cfg, ckpt, seed))
        clock.mark(f"finetune seed {seed}")
    emit_plots(csv_path, os.path.join(out, "finetune.svg"), _plot_limit(cfg), f"fine-tuning from {init}")
    clock.save(out)
    return {"out_dir": out, "metrics": csv_path}


# --- summaries used by compare / ablation ---------------------------------------------------------

def agg_trace(rows, seed, key):
    pts = sorted((r["iteration"], r[key]) for r in rows if r["task_id"] == "agg" and r["seed"] == seed)
    return np.array([v for _, v in pts])


def iterations_to_fraction(returns, fraction=0.8):
    """First iteration whose return reaches ``fraction`` of the final return.

    A non-positive final return has no meaningful fraction; the threshold is
    then the final return itself.
    """
    returns = np.asarray(returns, dtype=float)
    final = returns[-1]
    target = fraction * final if final > 0 else final
    return int(np.flatnonzero(returns >= target)[0])


def early_cost(rows, seed, n=10):
    """Mean cost of the batches collected in the first ``n`` fine-tuning iterations (rows 0 to n-1)."""
    costs = agg_trace(rows, seed, "mean_episode_cost")
    return float(np.mean(costs[:n]))


def cmd_compare(cfg: ExperimentConfig, out_dir=None, inits=INITS) -> dict:
    """Train every initialisation, fine-tune each on the same tasks, write one directory per init."""
    out = prepare_output(cfg, out_dir, "compare")
    clock = _Clock(cfg.experiment.record_wall_clock)
    results = {name: [] for name in inits}
    for name in inits:
        sub = os.path.join(out, name)
        os.makedirs(sub)
        for seed in cfg.experiment.seeds:
            ckpt, meta_rows, _ = train_checkpoint(cfg, seed, INIT_MODES[name])
            ckpt.save(os.path.join(sub, f"seed{seed}.ckpt"))
            if meta_rows:
                append_rows(os.path.join(sub, "meta_train.csv"), _meta_rows(meta_rows, seed, clock))
            rows = finetune_rows(cfg, ckpt, seed)
            append_rows(os.path.join(sub, "finetune.csv"), rows)
            results[name] += rows
            clock.mark(f"{name} seed {seed}")
    summary = ["init\tseed\titers_to_80pct\tearly_cost\tfinal_return\tfinal_cost\n"]
    series = {}
    for name in inits:
        for seed in cfg.experiment.seeds:
            ret = agg_trace(results[name], seed, "mean_episode_return")
            cost = agg_trace(results[name], seed, "mean_episode_cost")
            summary.append(f"{name}\t{seed}\t{iterations_to_fraction(ret)}\t{early_cost(results[name], seed)!r}"
                           f"\t{float(ret[-1])!r}\t{float(cost[-1])!r}\n")
        series.update(series_from_rows([r for r in results[name] if r["task_id"] == "agg"], f"{name}/"))
    _write(os.path.join(out, "summary.txt"), "".join(summary))
    _write(os.path.join(out, "finetune.svg"),
           render_svg(series, _plot_limit(cfg), "fine-tuning by initialisation"))
    clock.save(out)
    return {"out_dir": out, "rows": results}


def eta_arms(cfg: ExperimentConfig):
    adaptive = replace(cfg, outer=replace(cfg.outer, baseline_mode="cmaml", eta_trainable=True))
    frozen = replace(cfg, outer=replace(cfg.outer, baseline_mode="cmaml", eta_init=0.0,
                                        eta_trainable=False))
    return {"adaptive": adaptive, "frozen": frozen}


def cmd_ablate_eta(cfg: ExperimentConfig, out_dir=None, finetune=True) -> dict:
    """Adaptive-eta and eta=0 meta-training from the same seeds, each followed by fine-tuning."""
    out = prepare_output(cfg, out_dir, "ablate-eta")
    clock = _Clock(cfg.experiment.record_wall_clock)
    arms = eta_arms(cfg)
    finals, meta, fine = {}, {}, {}
    for arm, arm_cfg in arms.items():
        sub = os.path.join(out, arm)
        os.makedirs(sub)
        meta[arm], fine[arm] = [], []
        for seed in cfg.experiment.seeds:
            ckpt, rows, _ = train_checkpoint(arm_cfg, seed)
            ckpt.save(os.path.join(sub, f"seed{seed}.ckpt"))
            mrows = _meta_rows(rows, seed, clock)
            append_rows(os.path.join(sub, "meta_train.csv"), mrows)
            meta[arm] += mrows
            finals[(arm, seed)] = final_meta_evaluation(arm_cfg, ckpt, seed)
            if finetune:
                frows = finetune_rows(arm_cfg, ckpt, seed)
                append_rows(os.path.join(sub, "finetune.csv"), frows)
                fine[arm] += frows
            clock.mark(f"{arm} seed {seed}")
        emit_plots(os.path.join(sub, "meta_train.csv"), os.path.join(sub, "meta_train.svg"),
                   _plot_limit(cfg), f"meta-training, {arm} eta")
    lines = ["arm\tseed\tfinal_return\tfinal_cost\n"]
    for (arm, seed), (ret, cost) in finals.items():
        lines.append(f"{arm}\t{seed}\t{ret!r}\t{cost!r}\n")
    _write(os.path.join(out, "summary.txt"), "".join(lines))
    clock.save(out)
    return {"out_dir": out, "final": finals, "meta": meta, "finetune": fine}


# --- oracle check ---------------------------------------------------------------------------------

ORACLE_CHECK_TEXT = """\
experiment.name = oracle-check
env.family = tabular
env.count = 10
env.gamma = 0.95
env.horizon = 60
env.cost_limit = none
env.seed_range = (0, 500)
inner.kl_threshold = 0.02
inner.lambda_lr = 0.05
inner.adaptation_steps = 30
inner.rollouts_per_step = 20
inner.critic_hidden = ()
inner.critic_epochs = 100
inner.critic_lr = 0.1
inner.gae_lambda = 0.95
inner.normalize_reward_advantages = false
outer.policy_hidden = ()
"""


def oracle_check_config() -> ExperimentConfig:
    return ExperimentConfig.from_text(ORACLE_CHECK_TEXT)


def tabular_policy_matrix(policy, params, task):
    """``pi[s, a]`` of a discrete policy on one-hot states."""
    return softmax(raw_forward(policy.spec, params, np.eye(task.obs_dim)))


@dataclass
class OracleOutcome:
    task_id: int
    algorithm: str
    J: float
    J_star: float
    J_C: float
    d: float
    passed: bool
    kls: list

    def line(self):
        return (f"{self.algorithm} task {self.task_id}: J={self.J:.4f} J*={self.J_star:.4f} "
                f"({self.J / self.J_star:.1%}) J_C={self.J_C:.4f} d={self.d:.4f} "
                f"{'PASS' if self.passed else 'FAIL'}")


def oracle_task_outcome(cfg: ExperimentConfig, task, algorithm, seed):
    inner = replace(cfg.inner, algorithm=algorithm)
    policy = policy_for(task, cfg.outer.policy_hidden)
    params = np.zeros(policy.n_params)
    zero_critic = np.zeros(critic_spec_for(task, inner).n_params)
    res = adapt_task(policy, params, inner.lambda_init, zero_critic, task, inner,
                     stream(seed, "oracle", algorithm, task.task_id))
    ev = exact_policy_eval(task, tabular_policy_matrix(policy, res.policy_params, task))
    J_star = solve_cmdp_lp(task).optimal_return
    passed = ev.J >= 0.9 * J_star and ev.J_C <= task.cost_limit + 0.5
    kls = [k for k, a in zip(res.trace["kl"], res.trace["accepted"]) if a]
    return OracleOutcome(task.task_id, algorithm, ev.J, J_star, ev.J_C, task.cost_limit, bool(passed), kls)


def cmd_oracle_check(cfg: ExperimentConfig | None = None, algorithms=("trpo_lag", "cpo"), required=8,
                     log=print):
    """Learner-vs-LP suite on the tabular catalog; returns ``(all_passed, outcomes)``."""
    cfg = cfg or oracle_check_config()
    if cfg.env.family != "tabular":
        raise ValueError("oracle-check needs env.family = tabular")
    seed = cfg.experiment.seeds[0]
    outcomes = {}
    ok = True
    for alg in algorithms:
        outcomes[alg] = [oracle_task_outcome(cfg, task, alg, seed) for task in catalog(cfg.env)]
        for o in outcomes[alg]:
            log(o.line())
        n = sum(o.passed for o in outcomes[alg])
        alg_ok = n >= min(required, len(outcomes[alg]))
        ok &= alg_ok
        log(f"{alg}: {n}/{len(outcomes[alg])} tasks within tolerance -> {'PASS' if alg_ok else 'FAIL'}")
    return ok, outcomes
