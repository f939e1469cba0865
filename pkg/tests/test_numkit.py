import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cmaml.numkit import (
    GaussianPolicyOut,
    MlpSpec,
    Policy,
    ShapeError,
    conjugate_gradient,
    fisher_vector_product,
    gae,
    gaussian_kl,
    gaussian_log_prob,
    init_params,
    mlp_backward,
    mlp_forward,
    normalize,
)
from cmaml.numkit.distributions import categorical_kl, gaussian_log_prob_grad, gaussian_kl_grad_q

from _oracles import (
    central_difference_gradient,
    finite_difference_hessian,
    max_relative_error,
    naive_dense_forward,
    naive_gaussian_log_density,
)


# ---------------------------------------------------------------- mlp_forward

def test_identity_layer():
    spec = MlpSpec((2, 2), output_head="categorical_policy")
    params = np.array([1.0, 0.0, 0.0, 1.0, 0.0, 0.0])
    np.testing.assert_array_equal(mlp_forward(spec, params, [0.3, -0.2]), [0.3, -0.2])


def test_zero_params_scalar_head():
    spec = MlpSpec.value(3)
    assert mlp_forward(spec, np.zeros(spec.n_params), [5.0, -1.0, 2.0]) == 0.0


@pytest.mark.parametrize("seed", range(5))
def test_forward_matches_naive_loop(seed):
    rng = np.random.default_rng(seed)
    spec = MlpSpec((4, 5, 3, 2), output_head="categorical_policy")
    params = rng.normal(size=spec.n_params)
    x = rng.normal(size=4)
    out = mlp_forward(spec, params, x)
    np.testing.assert_allclose(out, naive_dense_forward(spec.layer_sizes, params, x), atol=1e-12, rtol=0)


def test_forward_rejects_wrong_shapes():
    spec = MlpSpec.value(3)
    with pytest.raises(ShapeError):
        mlp_forward(spec, np.zeros(spec.n_params + 1), np.zeros(3))
    with pytest.raises(ShapeError):
        mlp_forward(spec, np.zeros(spec.n_params), np.zeros(4))
    with pytest.raises(ShapeError):
        MlpSpec((3,))


def test_gaussian_head_clamps_log_std():
    spec = MlpSpec.policy(2, 2)
    params = np.zeros(spec.n_params)
    params[-2:] = [-9.0, 4.0]
    out = mlp_forward(spec, params, np.zeros(2))
    np.testing.assert_array_equal(out.log_std, [-5.0, 2.0])


# --------------------------------------------------------------- mlp_backward

def test_backward_zero_gradient():
    spec = MlpSpec.value(3, hidden=(4,))
    params = init_params(spec, np.random.default_rng(0))
    g = mlp_backward(spec, params, np.ones((2, 3)), np.zeros(2))
    np.testing.assert_array_equal(g, np.zeros(spec.n_params))


@pytest.mark.parametrize("seed", range(50))
def test_backward_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    spec = MlpSpec.value(3, hidden=(4, 3))
    params = rng.normal(size=spec.n_params)
    x = rng.normal(size=(5, 3))
    w = rng.normal(size=5)
    analytic = mlp_backward(spec, params, x, w)
    numeric = central_difference_gradient(lambda p: float(w @ mlp_forward(spec, p, x)), params)
    assert max_relative_error(analytic, numeric) <= 1e-4


def test_backward_is_linear_in_output_gradient():
    rng = np.random.default_rng(3)
    spec = MlpSpec((3, 6, 2), output_head="categorical_policy")
    params = rng.normal(size=spec.n_params)
    x = rng.normal(size=(4, 3))
    g1, g2 = rng.normal(size=(4, 2)), rng.normal(size=(4, 2))
    lhs = mlp_backward(spec, params, x, g1 + g2)
    rhs = mlp_backward(spec, params, x, g1) + mlp_backward(spec, params, x, g2)
    np.testing.assert_allclose(lhs, rhs, atol=1e-10, rtol=0)


# ------------------------------------------------------- gaussian densities/KL

def test_standard_normal_at_mode():
    out = GaussianPolicyOut([0.0], [0.0])
    assert gaussian_log_prob(out, [0.0]) == pytest.approx(-0.5 * math.log(2 * math.pi), abs=1e-12)
    assert gaussian_log_prob(out, [0.0]) == pytest.approx(-0.9189385, abs=1e-7)


def test_density_at_mean():
    mean, log_std = np.array([0.4, -1.0, 2.0]), np.array([0.1, -0.3, 0.7])
    expected = -log_std.sum() - 1.5 * math.log(2 * math.pi)
    assert gaussian_log_prob(GaussianPolicyOut(mean, log_std), mean) == pytest.approx(expected, abs=1e-12)


@pytest.mark.parametrize("seed", range(5))
def test_log_prob_matches_naive_formula(seed):
    rng = np.random.default_rng(seed)
    mean, log_std, a = rng.normal(size=3), rng.normal(size=3) * 0.5, rng.normal(size=3)
    got = gaussian_log_prob(GaussianPolicyOut(mean, log_std), a)
    assert got == pytest.approx(naive_gaussian_log_density(mean, log_std, a), abs=1e-12)


def test_kl_identical_is_zero():
    p = GaussianPolicyOut([0.3, -0.1], [0.2, -0.4])
    assert gaussian_kl(p, p) == 0.0


def test_kl_unit_shift():
    assert gaussian_kl(GaussianPolicyOut([0.0], [0.0]), GaussianPolicyOut([1.0], [0.0])) == pytest.approx(0.5)


def test_kl_matches_monte_carlo():
    rng = np.random.default_rng(11)
    p = GaussianPolicyOut(rng.normal(size=2), rng.normal(size=2) * 0.3)
    q = GaussianPolicyOut(rng.normal(size=2), rng.normal(size=2) * 0.3)
    x = p.mean + np.exp(p.log_std) * rng.standard_normal((10 ** 6, 2))
    samples = gaussian_log_prob(p, x) - gaussian_log_prob(q, x)
    se = samples.std() / math.sqrt(len(samples))
    assert abs(samples.mean() - gaussian_kl(p, q)) <= 3 * se


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=4, max_size=4), st.lists(st.floats(-2, 1), min_size=4, max_size=4))
def test_kl_nonnegative(means, log_stds):
    p = GaussianPolicyOut(means[:2], log_stds[:2])
    q = GaussianPolicyOut(means[2:], log_stds[2:])
    assert gaussian_kl(p, q) >= 0.0
    assert gaussian_kl(p, p) == 0.0


@pytest.mark.parametrize("seed", range(50))
def test_distribution_gradients_match_finite_differences(seed):
    rng = np.random.default_rng(100 + seed)
    d = 3
    mean, log_std, a = rng.normal(size=d), rng.normal(size=d) * 0.4, rng.normal(size=d)
    theta = np.concatenate([mean, log_std])
    g = gaussian_log_prob_grad(GaussianPolicyOut(mean, log_std), a)
    analytic = np.concatenate([g.mean[0], g.log_std])
    numeric = central_difference_gradient(
        lambda t: float(gaussian_log_prob(GaussianPolicyOut(t[:d], t[d:]), a)), theta)
    assert max_relative_error(analytic, numeric) <= 1e-4

    p = GaussianPolicyOut(rng.normal(size=d), rng.normal(size=d) * 0.4)
    gk = gaussian_kl_grad_q(p, GaussianPolicyOut(mean, log_std))
    analytic = np.concatenate([gk.mean[0], gk.log_std])
    numeric = central_difference_gradient(
        lambda t: float(gaussian_kl(p, GaussianPolicyOut(t[:d], t[d:]))), theta)
    assert max_relative_error(analytic, numeric) <= 1e-4


@pytest.mark.parametrize("discrete", [False, True])
@pytest.mark.parametrize("seed", range(25))
def test_policy_log_prob_and_kl_gradients(discrete, seed):
    rng = np.random.default_rng(200 + seed)
    pol = Policy(MlpSpec.policy(3, 2, hidden=(4,), discrete=discrete))
    params = init_params(pol.spec, rng, log_std_init=-0.3) + 0.3 * rng.normal(size=pol.n_params)
    obs = rng.normal(size=(6, 3))
    acts, _ = pol.sample(params, obs, rng)
    w = rng.normal(size=6)
    analytic = pol.grad_log_prob(params, obs, acts, w)
    numeric = central_difference_gradient(lambda p: float(w @ pol.log_prob(p, obs, acts)), params)
    assert max_relative_error(analytic, numeric) <= 1e-4

    old = pol.dist(pol.init(rng) + 0.3 * rng.normal(size=pol.n_params), obs)
    analytic = pol.grad_mean_kl(old, params, obs)
    numeric = central_difference_gradient(lambda p: pol.mean_kl(old, p, obs), params)
    assert max_relative_error(analytic, numeric) <= 1e-4


# ------------------------------------------------------- conjugate gradient

def test_cg_identity_single_iteration():
    b = np.array([1.0, -2.0, 3.5])
    np.testing.assert_allclose(conjugate_gradient(lambda v: v, b, iters=1), b)


def test_cg_matches_dense_solve():
    rng = np.random.default_rng(0)
    M = rng.normal(size=(3, 3))
    A = M @ M.T + 0.5 * np.eye(3)
    b = rng.normal(size=3)
    x = conjugate_gradient(lambda v: A @ v, b, iters=10, tol=1e-14)
    np.testing.assert_allclose(x, np.linalg.inv(A) @ b, atol=1e-8)


def test_cg_zero_rhs():
    np.testing.assert_array_equal(conjugate_gradient(lambda v: 2 * v, np.zeros(4)), np.zeros(4))


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10 ** 6), st.integers(2, 12))
def test_cg_energy_norm_residual_nonincreasing(seed, n):
    # The A^{-1}-norm of the residual (the A-norm of the error) is what CG
    # decreases monotonically on SPD systems.
    rng = np.random.default_rng(seed)
    M = rng.normal(size=(n, n))
    A = M @ M.T + 0.1 * np.eye(n)
    b = rng.normal(size=n)
    A_inv = np.linalg.inv(A)
    x_star = A_inv @ b
    errs = []
    for k in range(1, n + 1):
        x = conjugate_gradient(lambda v: A @ v, b, iters=k, tol=0.0)
        r = b - A @ x
        errs.append(float(r @ A_inv @ r))
    e0 = float(x_star @ A @ x_star)
    seq = [e0] + errs
    assert all(seq[i + 1] <= seq[i] * (1 + 1e-8) + 1e-12 for i in range(len(seq) - 1))


# ------------------------------------------------------ Fisher-vector product

def _tiny_policy(discrete):
    return Policy(MlpSpec.policy(2, 2, hidden=(2,), discrete=discrete))


@pytest.mark.parametrize("discrete", [False, True])
def test_fvp_zero_vector(discrete):
    pol = _tiny_policy(discrete)
    params = pol.init(np.random.default_rng(0))
    fv = fisher_vector_product(pol, params, np.ones((3, 2)), np.zeros(pol.n_params), 0.1)
    np.testing.assert_array_equal(fv, np.zeros(pol.n_params))


@pytest.mark.parametrize("discrete", [False, True])
@pytest.mark.parametrize("seed", range(10))
def test_fvp_positive_definite(discrete, seed):
    rng = np.random.default_rng(seed)
    pol = _tiny_policy(discrete)
    params = pol.init(rng, output_scale=1.0)
    v = rng.normal(size=pol.n_params)
    fv = fisher_vector_product(pol, params, rng.normal(size=(5, 2)), v, 0.1)
    assert v @ fv >= 0.1 * (v @ v) - 1e-12


@pytest.mark.parametrize("discrete", [False, True])
@pytest.mark.parametrize("seed", range(50))
def test_fvp_matches_finite_difference_hessian(discrete, seed):
    rng = np.random.default_rng(300 + seed)
    pol = _tiny_policy(discrete)
    assert pol.n_params <= 20
    params = pol.init(rng, output_scale=1.0, log_std_init=-0.2) + 0.2 * rng.normal(size=pol.n_params)
    states = rng.normal(size=(4, 2))
    old = pol.dist(params, states)
    H = finite_difference_hessian(lambda p: pol.mean_kl(old, p, states), params)
    v = rng.normal(size=pol.n_params)
    damping = 0.1
    np.testing.assert_allclose(
        fisher_vector_product(pol, params, states, v, damping), H @ v + damping * v, atol=1e-6, rtol=0)


# ------------------------------------------------------------------------ gae

def test_gae_returns_to_go():
    adv, ret = gae([1.0, 1.0, 1.0], np.zeros(3), 0.5, 1.0)
    np.testing.assert_allclose(adv, [1.75, 1.5, 1.0])
    np.testing.assert_allclose(ret, [1.75, 1.5, 1.0])


def test_gae_zero_rewards():
    adv, _ = gae(np.zeros(4), np.zeros(4), 0.9, 0.95)
    np.testing.assert_array_equal(adv, np.zeros(4))


def test_gae_lambda_zero_is_td_residual():
    rng = np.random.default_rng(5)
    r, v = rng.normal(size=6), rng.normal(size=6)
    gamma, last = 0.9, 0.7
    adv, _ = gae(r, v, gamma, 0.0, last_value=last)
    for t in range(6):
        nxt = v[t + 1] if t + 1 < 6 else last
        assert adv[t] == pytest.approx(r[t] + gamma * nxt - v[t], abs=1e-12)


def test_gae_length_mismatch():
    with pytest.raises(ShapeError):
        gae(np.zeros(3), np.zeros(4), 0.9, 0.9)


@settings(max_examples=50, deadline=None)
@given(st.floats(-5, 5), st.floats(0.0, 0.99), st.integers(1, 200))
def test_gae_constant_reward_geometric_sum(r, gamma, T):
    adv, _ = gae(np.full(T, r), np.zeros(T), gamma, 1.0)
    assert adv[0] == pytest.approx(r * (1 - gamma ** T) / (1 - gamma), abs=1e-10)


def test_normalize_moments():
    x = normalize(np.random.default_rng(0).normal(3.0, 5.0, size=100))
    assert abs(x.mean()) < 1e-6
    assert abs(x.std() - 1.0) < 1e-6


def test_categorical_kl_zero_on_identical():
    logits = np.array([[0.2, -1.0, 0.5]])
    assert categorical_kl(logits, logits)[0] == 0.0
