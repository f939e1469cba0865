"""Flattened rollout batches, critic fitting and advantage estimates."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..numkit.advantage import gae, normalize
from ..numkit.mlp import MlpSpec, mlp_backward, mlp_forward
from ..numkit.optim import Adam


@dataclass
class RolloutBatch:
    """All steps of a set of episodes, concatenated in episode order.

    ``discount`` holds ``gamma_c ** t`` for the cost channel, so that
    ``sum(discount * cost_adv) / n_episodes`` is the score-function
    estimate of the cost-return gradient weight.
    """

    obs: np.ndarray
    actions: np.ndarray
    logp_old: np.ndarray
    rewards: np.ndarray
    costs: np.ndarray
    episode: np.ndarray  # episode index of every step
    t: np.ndarray  # time index within the episode
    n_episodes: int
    bounds: list  # [(start, stop)] slices per episode
    last_obs: np.ndarray  # observation after the final step of each episode
    truncated: np.ndarray  # per episode
    episode_returns: np.ndarray  # undiscounted sums per episode
    episode_costs: np.ndarray

    def __len__(self):
        return len(self.rewards)

    def discounted(self, signal, gamma):
        """Per-episode ``sum_t gamma^t x_t``."""
        return np.bincount(self.episode, weights=gamma ** self.t * signal, minlength=self.n_episodes)


def make_batch(trajs) -> RolloutBatch:
    lengths = [len(tr) for tr in trajs]
    if min(lengths, default=0) < 1:
        raise ValueError("every trajectory needs at least one step")
    stops = np.cumsum(lengths)
    starts = stops - np.asarray(lengths)
    return RolloutBatch(
        obs=np.concatenate([tr.states for tr in trajs]),
        actions=np.concatenate([tr.actions for tr in trajs]),
        logp_old=np.concatenate([tr.action_log_probs for tr in trajs]),
        rewards=np.concatenate([tr.rewards for tr in trajs]),
        costs=np.concatenate([tr.costs for tr in trajs]),
        episode=np.repeat(np.arange(len(trajs)), lengths),
        t=np.concatenate([np.arange(n) for n in lengths]),
        n_episodes=len(trajs),
        bounds=list(zip(starts.tolist(), stops.tolist())),
        last_obs=np.stack([tr.last_state for tr in trajs]),
        truncated=np.array([tr.truncated for tr in trajs]),
        episode_returns=np.array([tr.episode_return for tr in trajs]),
        episode_costs=np.array([tr.episode_cost for tr in trajs]),
    )


def critic_loss(spec, params, states, targets):
    pred = mlp_forward(spec, params, states)
    return float(np.mean((pred - targets) ** 2))


def fit_critic(spec: MlpSpec, critic_params, states, targets, epochs=50, lr=1e-2):
    """Full-batch Adam on the mean squared error.

    Returns the parameters with the lowest training loss seen, which is never
    above the starting loss.
    """
    states = np.atleast_2d(np.asarray(states, dtype=float))
    targets = np.asarray(targets, dtype=float).reshape(-1)
    if len(states) != len(targets):
        raise ValueError("states and targets must have the same length")
    params = np.array(critic_params, dtype=float)
    best, best_loss = params.copy(), critic_loss(spec, params, states, targets)
    opt = Adam(params.size, lr=lr)
    n = len(targets)
    for _ in range(int(epochs)):
        pred = mlp_forward(spec, params, states)
        params = opt.step(params, mlp_backward(spec, params, states, 2.0 * (pred - targets) / n))
        loss = critic_loss(spec, params, states, targets)
        if loss < best_loss:
            best, best_loss = params.copy(), loss
    return best


@dataclass
class BatchEstimates:
    reward_adv: np.ndarray  # possibly normalised
    cost_adv: np.ndarray  # never normalised
    reward_targets: np.ndarray
    cost_targets: np.ndarray
    J: float  # mean discounted return
    J_C: float  # mean cost return in the constraint's measure
    mean_return: float  # undiscounted episode means
    mean_cost: float


def bootstrap_value(last_value, truncated, gamma):
    """Tail value credited to an episode's final observation.

    A discounted channel treats the horizon as a simulation cut-off of an
    infinite-horizon problem and bootstraps truncated episodes from the
    critic. An undiscounted channel measures the episode total over the
    horizon, so nothing follows the last step; bootstrapping there would also
    feed the critic its own output with no contraction and let it drift.
    """
    return float(last_value) if truncated and gamma < 1.0 else 0.0


def estimate(batch: RolloutBatch, reward_values, cost_values, reward_last, cost_last, gamma,
             cost_gamma, lam, normalize_rewards=True) -> BatchEstimates:
    """GAE for both channels; ``*_last`` are critic values at each episode's final observation.

    Episodes cut off by the horizon bootstrap from the critic only in a
    channel with discount below one (see :func:`bootstrap_value`).
    """
    n = len(batch)
    ra, rt, ca, ct = np.empty(n), np.empty(n), np.empty(n), np.empty(n)
    for ep, (a, b) in enumerate(batch.bounds):
        trunc = batch.truncated[ep]
        ra[a:b], rt[a:b] = gae(batch.rewards[a:b], reward_values[a:b], gamma, lam,
                               bootstrap_value(reward_last[ep], trunc, gamma))
        ca[a:b], ct[a:b] = gae(batch.costs[a:b], cost_values[a:b], cost_gamma, lam,
                               bootstrap_value(cost_last[ep], trunc, cost_gamma))
    return BatchEstimates(
        reward_adv=normalize(ra) if normalize_rewards else ra,
        cost_adv=ca,
        reward_targets=rt,
        cost_targets=ct,
        J=float(np.mean(batch.discounted(batch.rewards, gamma))),
        J_C=float(np.mean(batch.discounted(batch.costs, cost_gamma))),
        mean_return=float(np.mean(batch.episode_returns)),
        mean_cost=float(np.mean(batch.episode_costs)),
    )


def critic_values(spec, params, batch: RolloutBatch):
    return mlp_forward(spec, params, batch.obs), mlp_forward(spec, params, batch.last_obs)
