from dataclasses import replace

import numpy as np
import pytest

from cmaml.envs import TabularCmdp, TaskDistribution, Trajectory, grid_hazard_task, rollouts
from cmaml.envs.distribution import catalog
from cmaml.numkit import MlpSpec, Policy
from cmaml.numkit.distributions import softmax
from cmaml.numkit.mlp import init_params, mlp_forward
from cmaml.oracle import exact_policy_eval, exact_policy_gradient
from cmaml.meta import (
    CheckpointError,
    MetaCheckpoint,
    MetaGradientReport,
    MetaState,
    OuterConfig,
    eta_safety_gradient,
    fine_tune,
    fomaml_task_gradient,
    meta_train,
    policy_from_checkpoint,
    train_meta_cost_critic,
    update_eta,
    update_meta_lambda,
)
from cmaml.safe_rl import AdaptationResult, InnerLoopConfig, make_batch


def tabular_policy(S, A):
    return Policy(MlpSpec.policy(S, A, (), discrete=True))


def logits_to_params(logits):
    return np.concatenate([logits.T.ravel(), np.zeros(logits.shape[1])])


def constant_critic(obs_dim, value):
    spec = MlpSpec.value(obs_dim, ())
    p = np.zeros(spec.n_params)
    p[-1] = value
    return spec, p


def small_cmdp(seed, S=3, A=2, gamma=0.7):
    rng = np.random.default_rng(seed)
    M = rng.dirichlet(np.ones(S), size=(S, A))
    r = rng.normal(size=(S, A, S))
    c = rng.random((S, A, S))
    return TabularCmdp(M, r, c, np.eye(S)[0], gamma, cost_limit=1.0, horizon=60)


def _grad_wrt_logits(policy, g):
    """Split a linear-policy gradient into the per-state part ``(S, A)``."""
    S, A = policy.obs_dim, policy.act_dim
    return g[:S * A].reshape(A, S).T


# --- multiplier updates ----------------------------------------------------------------

def test_meta_lambda_examples():
    assert update_meta_lambda(0.4, [3.0, 5.0], 4.0, 0.1) == 0.4
    assert update_meta_lambda(0.0, [1.0, 2.0], 4.0, 0.1) == 0.0
    assert update_meta_lambda(0.4, [6.0, 6.0], 4.0, 0.1) == pytest.approx(0.6, abs=1e-15)
    with pytest.raises(ValueError):
        update_meta_lambda(0.4, [], 4.0, 0.1)


def _meta_batch(obs_dim=2, n=3):
    trajs = [Trajectory(np.eye(obs_dim)[[0] * 4], np.zeros(4, int), np.zeros(4), np.ones(4), np.zeros(4),
                        np.zeros(4, bool), True, np.eye(obs_dim)[0]) for _ in range(n)]
    return make_batch(trajs)


def test_eta_update_examples():
    batch = _meta_batch()
    spec, at_d = constant_critic(2, 5.0)
    assert update_eta(0.3, batch, spec, at_d, 5.0, 0.01) == 0.3
    _, above = constant_critic(2, 10.0)
    assert update_eta(0.3, batch, spec, above, 5.0, 0.01) == pytest.approx(0.35, abs=1e-12)
    _, low = constant_critic(2, 0.0)
    assert update_eta(0.01, batch, spec, low, 5.0, 0.01) == 0.0


def test_eta_update_needs_rollouts():
    spec, crit = constant_critic(2, 1.0)
    with pytest.raises(ValueError):
        update_eta(0.0, [], spec, crit, 1.0, 0.1)


def test_state_rejects_negative_multipliers():
    with pytest.raises(ValueError):
        MetaState(np.zeros(2), np.zeros(2), lam=-1.0)


def test_outer_config_validation():
    for kw in (dict(N=0), dict(B=0), dict(meta_lr_policy=0.0), dict(baseline_mode="x"),
               dict(eta_term_mode="x"), dict(lambda_init=-1.0)):
        with pytest.raises(ValueError):
            OuterConfig(**kw)


def test_report_rejects_non_finite():
    with pytest.raises(FloatingPointError):
        MetaGradientReport(np.array([np.nan]), np.zeros(1), 0.0, 0.0)


# --- first-order meta-gradient ------------------------------------------------------------

def _adapted(policy, params, spec):
    zero = np.zeros(spec.n_params)
    return AdaptationResult(params, 0.0, zero, zero)


def test_fomaml_zero_signals_give_zero_gradient():
    task = small_cmdp(0)
    task = TabularCmdp(task.M, np.zeros_like(task.r), np.zeros_like(task.c), task.mu, task.gamma,
                       horizon=20)
    pol = tabular_policy(3, 2)
    spec = MlpSpec.value(3, ())
    post = rollouts(task, pol, np.zeros(pol.n_params), np.random.default_rng(0), 20)
    g = fomaml_task_gradient(pol, _adapted(pol, np.zeros(pol.n_params), spec), 2.0, task, post, spec)
    assert np.array_equal(g, np.zeros(pol.n_params))


def test_fomaml_ignores_costs_without_multiplier():
    task = small_cmdp(1)
    pol = tabular_policy(3, 2)
    spec = MlpSpec.value(3, ())
    post = make_batch(rollouts(task, pol, np.zeros(pol.n_params), np.random.default_rng(0), 20))
    res = _adapted(pol, np.zeros(pol.n_params), spec)
    a = fomaml_task_gradient(pol, res, 0.0, task, post, spec)
    post.costs = post.costs * 0 + 3.0
    b = fomaml_task_gradient(pol, res, 0.0, task, post, spec)
    assert np.array_equal(a, b) and np.any(a)


def _chunked_gradients(task, pol, params, lam, chunks, per_chunk, seed):
    spec = MlpSpec.value(task.obs_dim, ())
    res = _adapted(pol, params, spec)
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(chunks):
        post = rollouts(task, pol, params, rng, per_chunk)
        out.append(fomaml_task_gradient(pol, res, lam, task, post, spec, gae_lambda=1.0))
    return np.array(out)


def test_fomaml_estimate_is_unbiased():
    task = small_cmdp(2)
    pol = tabular_policy(3, 2)
    logits = np.random.default_rng(2).normal(size=(3, 2))
    lam = 0.5
    G = _chunked_gradients(task, pol, logits_to_params(logits), lam, 100, 100, seed=11)
    est = np.array([_grad_wrt_logits(pol, g) for g in G])
    mean, se = est.mean(axis=0), est.std(axis=0, ddof=1) / np.sqrt(len(est))
    exact = exact_policy_gradient(task, logits, lam=lam)
    assert np.all(np.abs(mean - exact) <= 3 * se)


def test_fomaml_direction_matches_exact_gradient():
    task = grid_hazard_task((0, 0), (4, 4), [(1, 1), (2, 3), (3, 1)], gamma=0.8, horizon=60)
    pol = tabular_policy(25, 4)
    logits = np.random.default_rng(3).normal(size=(25, 4))
    lam = 1.5
    G = _chunked_gradients(task, pol, logits_to_params(logits), lam, 10, 1000, seed=5)
    est = _grad_wrt_logits(pol, G.mean(axis=0)).ravel()
    exact = exact_policy_gradient(task, logits, lam=lam).ravel()
    cos = est @ exact / (np.linalg.norm(est) * np.linalg.norm(exact))
    assert cos >= 0.9


# --- safety term ----------------------------------------------------------------------------

def bandit_cmdp(gamma=0.9, horizon=30):
    """One state, action 1 costs 1 per step, action 0 is free."""
    M = np.ones((1, 2, 1))
    c = np.zeros((1, 2, 1))
    c[0, 1, 0] = 1.0
    return TabularCmdp(M, np.zeros((1, 2, 1)), c, [1.0], gamma, cost_limit=1.0, horizon=horizon)


def test_eta_zero_gives_zero_gradient():
    task = bandit_cmdp()
    pol = tabular_policy(1, 2)
    batch = rollouts(task, pol, np.zeros(pol.n_params), np.random.default_rng(0), 5)
    spec, crit = constant_critic(1, 3.0)
    g = eta_safety_gradient(pol, np.zeros(pol.n_params), batch, spec, crit, 0.0, 0.9)
    assert np.array_equal(g, np.zeros(pol.n_params))
    with pytest.raises(ValueError):
        eta_safety_gradient(pol, np.zeros(pol.n_params), batch, spec, crit, -1.0, 0.9)


@pytest.mark.parametrize("mode", ["per_step", "initial_state"])
def test_costless_meta_rollouts_with_zero_critic_give_zero_gradient(mode):
    task = bandit_cmdp()
    task = TabularCmdp(task.M, task.r, np.zeros_like(task.c), task.mu, task.gamma, horizon=10)
    pol = tabular_policy(1, 2)
    batch = rollouts(task, pol, np.zeros(pol.n_params), np.random.default_rng(0), 5)
    spec, crit = constant_critic(1, 0.0)
    g = eta_safety_gradient(pol, np.zeros(pol.n_params), batch, spec, crit, 2.0, 0.9, mode)
    assert np.array_equal(g, np.zeros(pol.n_params))


@pytest.mark.parametrize("mode", ["per_step", "initial_state"])
def test_safety_step_moves_toward_free_action(mode):
    gamma = 0.9
    task = bandit_cmdp(gamma, horizon=200)
    pol = tabular_policy(1, 2)
    params = np.zeros(pol.n_params)
    pi1 = 0.5
    # exact cost value of the current policy
    spec, crit = constant_critic(1, pi1 / (1 - gamma))
    batch = rollouts(task, pol, params, np.random.default_rng(1), 200)
    g = eta_safety_gradient(pol, params, batch, spec, crit, 1.0, gamma, mode)
    new = params + 0.1 * g
    before = exact_policy_eval(task, softmax(params[:2][None] + params[2:])).V_C[0]
    after_pi = softmax((new[:2] + new[2:])[None])
    assert after_pi[0, 0] > 0.5
    assert exact_policy_eval(task, after_pi).V_C[0] < before


# --- meta cost critic ----------------------------------------------------------------------------

def test_meta_critic_zero_cost():
    task = bandit_cmdp()
    task = TabularCmdp(task.M, task.r, np.zeros_like(task.c), task.mu, task.gamma, horizon=15)
    pol = tabular_policy(1, 2)
    spec = MlpSpec.value(1, (8,))
    batch = make_batch(rollouts(task, pol, np.zeros(pol.n_params), np.random.default_rng(0), 4))
    crit = train_meta_cost_critic(spec, init_params(spec, np.random.default_rng(1)), batch, 0.9,
                                  epochs=300, lr=1e-2)
    assert np.mean(mlp_forward(spec, crit, batch.obs) ** 2) < 1e-3


def test_meta_critic_geometric_sum_at_initial_state():
    gamma, H = 0.9, 20
    S = H + 1
    M = np.zeros((S, 1, S))
    for s in range(S):
        M[s, 0, min(s + 1, S - 1)] = 1.0
    task = TabularCmdp(M, np.zeros((S, 1, S)), np.ones((S, 1, S)), np.eye(S)[0], gamma, horizon=H)
    pol = tabular_policy(S, 1)
    spec = MlpSpec.value(S, ())
    batch = make_batch(rollouts(task, pol, np.zeros(pol.n_params), np.random.default_rng(0), 2))
    crit = train_meta_cost_critic(spec, np.zeros(spec.n_params), batch, gamma, epochs=2000, lr=5e-2)
    v0 = mlp_forward(spec, crit, np.eye(S)[:1])[0]
    assert v0 == pytest.approx((1 - gamma ** H) / (1 - gamma), rel=0.05)


def test_meta_critic_matches_dynamic_programming():
    task = grid_hazard_task((0, 0), (4, 4), [(1, 1), (2, 2), (3, 1), (1, 3)], gamma=0.8, horizon=80)
    pol = tabular_policy(25, 4)
    logits = np.random.default_rng(4).normal(size=(25, 4))
    batch = make_batch(rollouts(task, pol, logits_to_params(logits), np.random.default_rng(0), 500))
    spec = MlpSpec.value(25, ())
    crit = train_meta_cost_critic(spec, np.zeros(spec.n_params), batch, task.gamma, epochs=1000, lr=5e-2)
    exact = exact_policy_eval(task, softmax(logits)).V_C
    pred = mlp_forward(spec, crit, batch.obs)
    truth = exact[batch.obs.argmax(axis=1)]
    assert np.mean(np.abs(pred - truth)) <= 0.3


# --- checkpoint ------------------------------------------------------------------------------------

def _ckpt():
    rng = np.random.default_rng(0)
    return MetaCheckpoint("cmaml", 3, 7, 0.25, 1.5, (4, 8, 2), "gaussian_policy", (4, 1),
                          {"policy": rng.normal(size=60), "cost_critic": rng.normal(size=5)},
                          {"outer.B": 4, "inner.kl_threshold": 0.01})


def test_checkpoint_round_trip(tmp_path):
    ck = _ckpt()
    path = tmp_path / "meta.ckpt"
    ck.save(path)
    back = MetaCheckpoint.load(path)
    assert back.to_bytes() == ck.to_bytes()
    assert np.array_equal(back.policy_params, ck.policy_params)
    assert (back.lam, back.eta, back.iteration, back.seed) == (0.25, 1.5, 7, 3)
    assert back.config["outer.B"] == "4"
    assert path.read_bytes().startswith(b"CMAML-CKPT 1\n")


def test_checkpoint_rejects_bad_input():
    data = _ckpt().to_bytes()
    with pytest.raises(CheckpointError):
        MetaCheckpoint.from_bytes(b"NOPE 1\n{}\n")
    with pytest.raises(CheckpointError):
        MetaCheckpoint.from_bytes(data.replace(b"CMAML-CKPT 1", b"CMAML-CKPT 9", 1))
    with pytest.raises(CheckpointError):
        MetaCheckpoint.from_bytes(data[:-8])


def test_policy_from_checkpoint():
    pol = policy_from_checkpoint(_ckpt())
    assert pol.obs_dim == 4 and pol.act_dim == 2 and not pol.discrete


# --- meta-training -----------------------------------------------------------------------------

GRID = TaskDistribution(family="tabular", count=6, gamma=0.9, horizon=30, cost_limit=None)
INNER = InnerLoopConfig(critic_hidden=(), critic_lr=0.1, critic_epochs=20,
                        normalize_reward_advantages=False, rollouts_per_step=5)
OUTER = OuterConfig(N=3, B=2, meta_rollouts=6, post_rollouts=5, policy_hidden=())


def test_meta_train_is_deterministic():
    a = meta_train(GRID, INNER, OUTER, seed=4)
    b = meta_train(GRID, INNER, OUTER, seed=4)
    assert a[0].to_bytes() == b[0].to_bytes()
    assert a[1] == b[1]


def test_meta_train_rows_and_multipliers():
    ck, rows, reports = meta_train(GRID, INNER, replace(OUTER, meta_lr_eta=1.0), seed=1)
    agg = [r for r in rows if r["task_id"] == "agg"]
    assert [r["iteration"] for r in agg] == [0, 1, 2]
    assert len(rows) == 3 * (1 + OUTER.B)
    assert all(r["lam"] >= 0 and r["eta"] >= 0 for r in rows)
    assert len(reports) == 3 and ck.iteration == 3


def test_unconstrained_mode_never_uses_costs():
    outer = replace(OUTER, baseline_mode="maml_unconstrained", lambda_init=2.0, eta_init=3.0)
    ck, rows, reports = meta_train(GRID, INNER, outer, seed=2)
    assert ck.lam == 0.0 and ck.eta == 0.0
    assert all(r["lam"] == 0.0 and r["eta"] == 0.0 for r in rows if r["task_id"] == "agg")
    assert all(not np.any(rep.eta_term) for rep in reports)


def test_frozen_multipliers_stay_put():
    outer = replace(OUTER, lambda_trainable=False, eta_trainable=False, lambda_init=0.5)
    ck, rows, _ = meta_train(GRID, INNER, outer, seed=2)
    assert ck.lam == 0.5 and ck.eta == 0.0
    assert all(r["eta"] == 0.0 for r in rows)


def test_degenerate_meta_step_is_one_policy_gradient_step():
    # a vanishing trust region leaves the adapted policy at the meta policy
    inner = replace(INNER, algorithm="trpo", kl_threshold=1e-14)
    outer = OuterConfig(N=1, B=1, meta_rollouts=2, post_rollouts=50, policy_hidden=(),
                        eta_trainable=False, lambda_trainable=False, meta_gae_lambda=1.0,
                        init_output_scale=0.0)
    ck, _, reports = meta_train(GRID, inner, outer, seed=0)
    update = ck.policy_params - np.zeros_like(ck.policy_params)
    assert np.array_equal(update, outer.meta_lr_policy * reports[0].fomaml_term)
    assert not np.any(reports[0].eta_term)
    assert np.any(update)


def test_random_mode_returns_initialisation():
    ck, rows, _ = meta_train(GRID, INNER, replace(OUTER, baseline_mode="random"), seed=3)
    assert rows == [] and ck.iteration == 0 and ck.mode == "random"


def test_pretrain_mode_checkpoint_is_usable():
    ck, rows, _ = meta_train(GRID, INNER, replace(OUTER, baseline_mode="pretrain_single"), seed=3)
    assert ck.mode == "pretrain_single" and len(rows) == OUTER.N
    pol = policy_from_checkpoint(MetaCheckpoint.from_bytes(ck.to_bytes()))
    task = catalog(GRID)[0]
    trace, _ = fine_tune(pol, ck.policy_params, task, INNER, 2, np.random.default_rng(0))
    assert len(trace) == 3


# --- fine-tuning -------------------------------------------------------------------------------------

def test_fine_tune_zero_steps_only_evaluates():
    task = catalog(GRID)[0]
    pol = tabular_policy(25, 4)
    rows, params = fine_tune(pol, np.zeros(pol.n_params), task, INNER, 0, np.random.default_rng(0))
    assert len(rows) == 1 and rows[0]["iteration"] == 0 and np.array_equal(params, np.zeros(pol.n_params))


def test_fine_tune_is_deterministic():
    task = catalog(GRID)[1]
    pol = tabular_policy(25, 4)
    a = fine_tune(pol, np.zeros(pol.n_params), task, INNER, 3, np.random.default_rng(7))
    b = fine_tune(pol, np.zeros(pol.n_params), task, INNER, 3, np.random.default_rng(7))
    assert a[0] == b[0] and np.array_equal(a[1], b[1])


def test_fine_tune_dimension_mismatch():
    task = catalog(GRID)[0]
    pol = tabular_policy(9, 4)
    with pytest.raises(ValueError, match="obs"):
        fine_tune(pol, np.zeros(pol.n_params), task, INNER, 1, np.random.default_rng(0))
