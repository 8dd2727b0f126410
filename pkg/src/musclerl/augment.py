"""Trajectory multiplication by target relabelling.

Motion states and actions are physical and stay untouched; only the target
slots of every stored observation change, and the rewards are recomputed for
the new target from the stored noiseless outputs. Each copy draws one global
sign and one componentwise-uniform vector Z, shared by the whole trajectory
(targets are episode constants, so both states of every transition shift
together):

    target_new = clip(target +- delta * Z, target_range)
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .env import RewardSpec, TARGET_SLICE, reward
from .randomize import SeededRng
from .sac import Trajectory


@dataclass(frozen=True)
class AugmentationSpec:
    """Number of copies per episode and the target-perturbation law."""

    n_copies: int = 10
    delta: float = 2.0
    target_low: float = -10.0
    target_high: float = 10.0

    def __post_init__(self):
        if self.n_copies < 0 or self.delta < 0:
            raise ValueError("n_copies and delta must be nonnegative")


def relabel_trajectory(traj: Trajectory, new_target: np.ndarray,
                       reward_spec: RewardSpec) -> Trajectory:
    """Copy of traj with the target replaced and rewards recomputed."""
    obs = traj.obs.copy()
    obs[:, TARGET_SLICE] = new_target
    rewards = np.empty_like(traj.rewards)
    for t in range(traj.length):
        rewards[t] = reward(reward_spec, traj.outputs[t], new_target, traj.actions[t])
    return Trajectory(obs, traj.outputs.copy(), traj.actions.copy(), rewards,
                      traj.truncated, traj.controller)


def augment_trajectory(traj: Trajectory, spec: AugmentationSpec,
                       reward_spec: RewardSpec, rng: SeededRng) -> list[Trajectory]:
    """n_copies relabelled trajectories; delta = 0 reproduces the original."""
    out = []
    base_target = traj.target.copy()
    for _ in range(spec.n_copies):
        sign = rng.sign()
        z = rng.uniform(0.0, 1.0, size=base_target.shape[0])
        new_target = np.clip(base_target + sign * spec.delta * z,
                             spec.target_low, spec.target_high)
        out.append(relabel_trajectory(traj, new_target, reward_spec))
    return out
