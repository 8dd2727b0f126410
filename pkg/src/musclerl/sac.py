"""Soft actor-critic over trajectories, with recurrent actor and twin critics.

The actor maps observation sequences to a squashed-Gaussian action head; the
critics consume (observation, action) per step. Updates run backprop through
time over whole trajectories (episodes are 30-40 steps, no truncation).
Critic targets bootstrap through the elementwise minimum of the two target
critics minus the entropy term; the temperature is auto-tuned toward a fixed
entropy target. Target networks track the online critics by Polyak blending.

All episodes end by time limit, so the bootstrap continues through the final
transition (a trajectory stored with truncated=False would instead cut the
return there). The twin critics run as one stacked pass (see nets); the
result is bitwise identical to two separate passes.
"""

from __future__ import annotations

import numpy as np

from .nets import (
    AdamState,
    NetworkShape,
    StackedNets,
    action_grads,
    adam_update,
    backward,
    backward_stacked,
    forward,
    forward_stacked,
    grads_to_flat,
    init_params,
    log_prob_grads,
    split_head,
    squash_mean,
    squash_sample,
)
from .randomize import SeededRng

REPLAY_CAPACITY = 100_000
BATCH_TRAJECTORIES = 20


class Trajectory:
    """One episode: T transitions over T+1 states.

    obs[t] is the (noisy) observation the controller acted on; outputs[t] is
    the matching noiseless plant output the reward was computed from, kept so
    rewards can be recomputed exactly under a different target. The stored
    reward r[t] pairs with (obs[t], actions[t]); obs of step t+1 is row t+1
    of the same array, so consecutive transitions share states by layout.
    """

    __slots__ = ("obs", "outputs", "actions", "rewards", "truncated", "controller")

    def __init__(self, obs, outputs, actions, rewards, truncated=True, controller="policy"):
        T = actions.shape[0]
        if obs.shape[0] != T + 1 or outputs.shape[0] != T + 1 or rewards.shape[0] != T:
            raise ValueError("trajectory arrays disagree on episode length")
        self.obs = obs
        self.outputs = outputs
        self.actions = actions
        self.rewards = rewards
        self.truncated = truncated
        self.controller = controller

    @property
    def length(self) -> int:
        return self.actions.shape[0]

    @property
    def target(self) -> np.ndarray:
        return self.obs[0, 4:6]

    def copy(self) -> "Trajectory":
        return Trajectory(self.obs.copy(), self.outputs.copy(), self.actions.copy(),
                          self.rewards.copy(), self.truncated, self.controller)


class ReplayBuffer:
    """FIFO ring of trajectories with uniform without-replacement sampling."""

    def __init__(self, capacity: int = REPLAY_CAPACITY):
        self.capacity = capacity
        self._items: list[Trajectory] = []
        self._next = 0
        self._length: int | None = None

    def __len__(self) -> int:
        return len(self._items)

    def push(self, traj: Trajectory) -> None:
        if self._length is None:
            self._length = traj.length
        elif traj.length != self._length:
            raise ValueError(
                f"trajectory length {traj.length} != buffer episode length {self._length}"
            )
        if len(self._items) < self.capacity:
            self._items.append(traj)
        else:
            self._items[self._next] = traj
            self._next = (self._next + 1) % self.capacity

    def sample(self, batch_size: int, rng: SeededRng) -> list[Trajectory]:
        if len(self._items) < batch_size:
            raise ValueError(
                f"buffer holds {len(self._items)} trajectories, need {batch_size}"
            )
        idx = rng.choice_without_replacement(len(self._items), batch_size)
        return [self._items[i] for i in idx]

    def snapshot(self) -> list[Trajectory]:
        return list(self._items)


class SacAgent:
    """Actor, twin critics with targets, temperature, and their optimizers."""

    def __init__(
        self,
        obs_dim: int,
        action_dim: int,
        rng: SeededRng,
        gru_hidden: int = 256,
        lr: float = 3e-4,
        tau: float = 0.005,
        action_center=0.0,
        action_half=10.0,
        target_entropy: float | None = None,
        fixed_alpha: float | None = None,
    ):
        self.obs_dim = obs_dim
        self.action_dim = action_dim
        self.gru_hidden = gru_hidden
        self.tau = tau
        self.action_center = np.broadcast_to(np.asarray(action_center, dtype=np.float64),
                                             (action_dim,)).copy()
        self.action_half = np.broadcast_to(np.asarray(action_half, dtype=np.float64),
                                           (action_dim,)).copy()
        self.target_entropy = float(-action_dim if target_entropy is None else target_entropy)
        self.fixed_alpha = fixed_alpha

        actor_shape = NetworkShape(obs_dim, gru_hidden, 2 * action_dim, head="squashed_gaussian")
        critic_shape = NetworkShape(obs_dim + action_dim, gru_hidden, 1)
        self.actor = init_params(actor_shape, rng.split("actor"))
        self.q1 = init_params(critic_shape, rng.split("critic-1"))
        self.q2 = init_params(critic_shape, rng.split("critic-2"))
        self.q1_target = self.q1.copy()
        self.q2_target = self.q2.copy()
        self.log_alpha = np.zeros(1)

        self.opt_actor = AdamState.for_params(self.actor.flat, lr)
        self.opt_q1 = AdamState.for_params(self.q1.flat, lr)
        self.opt_q2 = AdamState.for_params(self.q2.flat, lr)
        self.opt_alpha = AdamState.for_params(self.log_alpha, lr)
        self._noise_rng = rng.split("update-noise")
        self._actor_stack = StackedNets([self.actor])
        self._ws: dict = {}

    @property
    def alpha(self) -> float:
        if self.fixed_alpha is not None:
            return float(self.fixed_alpha)
        return float(np.exp(self.log_alpha[0]))

    def refresh_stacks(self) -> None:
        """Rebuild cached stacked weights after any in-place parameter change."""
        self._actor_stack = StackedNets([self.actor])

    # -- acting -----------------------------------------------------------

    def initial_hidden(self) -> np.ndarray:
        return np.zeros((1, 1, self.gru_hidden))

    def act(self, obs, hidden, deterministic: bool = False, rng: SeededRng | None = None):
        """One action from the current observation, carrying the GRU state.

        Stochastic mode samples the squashed Gaussian; deterministic mode
        returns the squashed mean (evaluation policy).
        """
        x = np.asarray(obs, dtype=np.float64).reshape(1, 1, 1, -1)
        y, h_next, ws = forward_stacked(self._actor_stack, x, hidden,
                                        cache=self._ws.get("act"))
        self._ws["act"] = ws
        mu, log_sd, _ = split_head(y[0, 0, 0])
        if deterministic:
            action = squash_mean(mu, self.action_center, self.action_half)
        else:
            noise_rng = rng if rng is not None else self._noise_rng
            noise = noise_rng.standard_normal(self.action_dim)
            action, _, _ = squash_sample(mu, log_sd, noise, self.action_center, self.action_half)
        return action, h_next

    # -- learning ---------------------------------------------------------

    def _policy_sample_seq(self, mu, log_sd, noise):
        return squash_sample(mu, log_sd, noise, self.action_center, self.action_half)

    def _critic_targets(self, obs_all, actions_next, logp_next, rewards, gamma, truncated):
        """Bellman targets y_t = r_t + gamma (min_i Qbar_i(s', a') - alpha log pi)."""
        q_in = np.concatenate([obs_all[1:], actions_next], axis=2)
        sp = StackedNets([self.q1_target, self.q2_target])
        qb, _, ws = forward_stacked(sp, q_in[None], cache=self._ws.get("target"))
        self._ws["target"] = ws
        qmin = np.minimum(qb[0, :, :, 0], qb[1, :, :, 0])
        value_next = qmin - self.alpha * logp_next
        if not truncated:
            value_next[-1] = 0.0  # absorbing end: no bootstrap through the last step
        return rewards + gamma * value_next

    def update(self, batch: list[Trajectory], gamma: float) -> dict:
        """One gradient step of critics, actor, and temperature on a batch.

        Returns the loss report; raises on non-finite losses so the caller
        can dump diagnostics and abort rather than train on garbage.
        """
        T = batch[0].length
        obs_all = np.stack([t.obs for t in batch], axis=1)        # (T+1, N, obs)
        actions = np.stack([t.actions for t in batch], axis=1)    # (T, N, A)
        rewards = np.stack([t.rewards for t in batch], axis=1)    # (T, N)
        truncated = all(t.truncated for t in batch)
        N = len(batch)
        count = T * N
        critic_shape = self.q1.shape

        # fresh policy samples along the whole stored state sequence
        y_pi, _, actor_cache = forward_stacked(self._actor_stack, obs_all[None],
                                               cache=self._ws.get("actor"))
        self._ws["actor"] = actor_cache
        y_pi = y_pi[0]
        mu, log_sd, clip_mask = split_head(y_pi)
        sd = np.exp(log_sd)
        noise_pi = self._noise_rng.standard_normal((T, N, self.action_dim))
        noise_next = self._noise_rng.standard_normal((T, N, self.action_dim))
        a_pi, logp_pi, u_pi = self._policy_sample_seq(mu[:T], log_sd[:T], noise_pi)
        a_next, logp_next, _ = self._policy_sample_seq(mu[1:], log_sd[1:], noise_next)

        targets = self._critic_targets(obs_all, a_next, logp_next, rewards, gamma, truncated)

        # critics on stored actions, twin-stacked over a shared input
        q_in_stored = np.concatenate([obs_all[:T], actions], axis=2)
        sp_q = StackedNets([self.q1, self.q2])
        q, _, cache_q = forward_stacked(sp_q, q_in_stored[None], cache=self._ws.get("critic"))
        self._ws["critic"] = cache_q
        td = q[:, :, :, 0] - targets[None]
        critic1_loss = float(np.mean(td[0] * td[0]))
        critic2_loss = float(np.mean(td[1] * td[1]))
        dq = (2.0 / count) * td[..., None]
        q_grads, _, _ = backward_stacked(cache_q, dq)
        adam_update(self.q1.flat, grads_to_flat(critic_shape, q_grads, 0), self.opt_q1)
        adam_update(self.q2.flat, grads_to_flat(critic_shape, q_grads, 1), self.opt_q2)

        # actor: alpha log pi - min_i Q_i(s, a_pi), against the updated critics
        q_in_pi = np.concatenate([obs_all[:T], a_pi], axis=2)
        sp_q2 = StackedNets([self.q1, self.q2])
        q_pi, _, cache_pi = forward_stacked(sp_q2, q_in_pi[None], cache=self._ws.get("critic_pi"))
        self._ws["critic_pi"] = cache_pi
        q1v, q2v = q_pi[0, :, :, 0], q_pi[1, :, :, 0]
        qmin = np.minimum(q1v, q2v)
        alpha = self.alpha
        actor_loss = float(np.mean(alpha * logp_pi - qmin))

        pick1 = q1v <= q2v
        dq_pi = np.empty((2, T, N, 1))
        dq_pi[0, :, :, 0] = np.where(pick1, -1.0 / count, 0.0)
        dq_pi[1, :, :, 0] = np.where(pick1, 0.0, -1.0 / count)
        _, dx_pi, _ = backward_stacked(cache_pi, dq_pi, need_param_grads=False)
        d_action = dx_pi[0, :, :, self.obs_dim:] + dx_pi[1, :, :, self.obs_dim:]

        dlp_dmu, dlp_dls = log_prob_grads(noise_pi, u_pi, sd[:T])
        da_dmu, da_dls = action_grads(noise_pi, u_pi, sd[:T], self.action_half)
        scale = alpha / count
        dmu = scale * dlp_dmu + d_action * da_dmu
        dls = scale * dlp_dls + d_action * da_dls

        dy_actor = np.zeros((1, T + 1, N, 2 * self.action_dim))
        dy_actor[0, :T, :, : self.action_dim] = dmu
        dy_actor[0, :T, :, self.action_dim:] = dls * clip_mask[:T]
        actor_grads_stacked, _, _ = backward_stacked(actor_cache, dy_actor)
        actor_grads = grads_to_flat(self.actor.shape, actor_grads_stacked, 0)
        adam_update(self.actor.flat, actor_grads, self.opt_actor)

        # temperature: push mean log pi toward -target_entropy
        entropy_gap = float(np.mean(logp_pi) + self.target_entropy)
        alpha_loss = float(-self.log_alpha[0] * entropy_gap)
        if self.fixed_alpha is None:
            adam_update(self.log_alpha, np.array([-entropy_gap]), self.opt_alpha)

        self.soft_update(self.tau)
        self.refresh_stacks()

        report = {
            "critic1_loss": critic1_loss,
            "critic2_loss": critic2_loss,
            "actor_loss": actor_loss,
            "alpha_loss": alpha_loss,
            "alpha": self.alpha,
            "entropy": float(-np.mean(logp_pi)),
        }
        if not all(np.isfinite(v) for v in report.values()):
            raise FloatingPointError(f"non-finite losses in update: {report}")
        return report

    def soft_update(self, tau: float) -> None:
        """Polyak blend of online critics into the targets."""
        if not (0.0 <= tau <= 1.0):
            raise ValueError("tau must lie in [0, 1]")
        for online, target in ((self.q1, self.q1_target), (self.q2, self.q2_target)):
            target.flat *= 1.0 - tau
            target.flat += tau * online.flat
