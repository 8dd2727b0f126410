import numpy as np
import pytest

from musclerl.augment import AugmentationSpec, augment_trajectory, relabel_trajectory
from musclerl.config import RunConfig
from musclerl.env import EYE_REWARD, WRIST_REWARD, reward
from musclerl.pid import PidActionPolicy, PidController, PidGains, WRIST_GAINS, gains_for
from musclerl.plant import eye_config, wrist_config
from musclerl.randomize import SeededRng
from musclerl.sac import Trajectory
from musclerl.trainer import Trainer


class StubRng:
    """Fixed sign and Z draws for exact augmentation arithmetic."""

    def __init__(self, sign, z):
        self._sign = sign
        self._z = np.asarray(z, dtype=np.float64)

    def sign(self):
        return self._sign

    def uniform(self, lo=0.0, hi=1.0, size=None):
        return self._z.copy()


def random_traj(T=8, action_dim=3, seed=0, target=None):
    rng = np.random.default_rng(seed)
    obs = rng.uniform(-10, 10, size=(T + 1, 6))
    tgt = rng.uniform(-10, 10, size=2) if target is None else np.asarray(target, float)
    obs[:, 4:6] = tgt
    outputs = rng.uniform(-12, 12, size=(T + 1, 4))
    actions = rng.uniform(0, 10, size=(T, action_dim))
    spec = WRIST_REWARD if action_dim == 3 else EYE_REWARD
    rewards = np.array([reward(spec, outputs[t], tgt, actions[t]) for t in range(T)])
    return Trajectory(obs, outputs, actions, rewards)


# -- PID ----------------------------------------------------------------------


def test_pid_zero_error_zero_output():
    pid = PidController(WRIST_GAINS)
    u = pid.update(np.zeros(2), 0.5)
    assert np.array_equal(u, np.zeros(2))


def test_pid_first_step_worked_example():
    pid = PidController(PidGains(kp=3.3, ki=0.5, kd=0.3, output_limit=45.0))
    u = pid.update(np.array([1.0, 0.0]), 0.5)
    assert u[0] == pytest.approx(3.3 + 0.25 + 0.6, abs=1e-12)
    assert u[1] == 0.0


def test_pid_output_always_inside_action_box():
    rng = np.random.default_rng(0)
    eye = PidActionPolicy("eye", eye_config())
    wrist = PidActionPolicy("wrist", wrist_config())
    for _ in range(2000):
        obs = rng.uniform(-60, 60, size=6)
        a_eye = eye.act(obs)
        a_wrist = wrist.act(obs)
        assert np.all(a_eye >= -10.0) and np.all(a_eye <= 10.0)
        assert np.all(a_wrist >= 0.0) and np.all(a_wrist <= 10.0)


def test_pid_integral_respects_clamp():
    gains = PidGains(kp=1.0, ki=0.5, kd=0.0, output_limit=10.0, integral_limit=3.0)
    pid = PidController(gains)
    for _ in range(200):
        pid.update(np.array([50.0, -50.0]), 0.5)
        assert np.all(np.abs(pid.integral) <= 3.0)


def test_pid_default_integral_clamp_saturates_output():
    g = gains_for("wrist", wrist_config())
    assert g.i_clamp == pytest.approx(g.output_limit / g.ki)


def test_pid_gain_scaling():
    g = gains_for("eye", scale=2.0)
    assert (g.kp, g.ki, g.kd) == (4.2, 0.4, 1.0)


# -- augmentation -------------------------------------------------------------


def test_zero_delta_reproduces_original_exactly():
    traj = random_traj(seed=1)
    spec = AugmentationSpec(n_copies=4, delta=0.0)
    copies = augment_trajectory(traj, spec, WRIST_REWARD, SeededRng(0))
    assert len(copies) == 4
    for c in copies:
        assert np.array_equal(c.obs, traj.obs)
        assert np.array_equal(c.rewards, traj.rewards)
        assert np.array_equal(c.actions, traj.actions)


def test_target_shift_worked_example():
    traj = random_traj(seed=2, target=(5.0, 5.0))
    spec = AugmentationSpec(n_copies=1, delta=2.0)
    (copy,) = augment_trajectory(traj, spec, WRIST_REWARD, StubRng(+1.0, (1.0, 0.5)))
    assert np.array_equal(copy.obs[0, 4:6], [7.0, 6.0])
    assert np.all(copy.obs[:, 4:6] == [7.0, 6.0])
    # motion components bit-identical
    assert np.array_equal(copy.obs[:, :4], traj.obs[:, :4])
    assert np.array_equal(copy.outputs, traj.outputs)
    assert np.array_equal(copy.actions, traj.actions)


def test_target_shift_clamps_to_range():
    traj = random_traj(seed=3, target=(9.5, -9.5))
    spec = AugmentationSpec(n_copies=1, delta=2.0)
    (up,) = augment_trajectory(traj, spec, WRIST_REWARD, StubRng(+1.0, (1.0, 1.0)))
    assert np.array_equal(up.obs[0, 4:6], [10.0, -7.5])
    (down,) = augment_trajectory(traj, spec, WRIST_REWARD, StubRng(-1.0, (1.0, 1.0)))
    assert np.array_equal(down.obs[0, 4:6], [7.5, -10.0])


def test_augmented_rewards_match_brute_force_oracle():
    # independent recomputation, written out long-hand
    def oracle(outputs_row, target, action, q, ra, th, bonus):
        e0 = abs(target[0] - outputs_row[0])
        e1 = abs(0.0 - outputs_row[1])
        e2 = abs(target[1] - outputs_row[2])
        e3 = abs(0.0 - outputs_row[3])
        cost = q[0] * e0 * e0 + q[1] * e1 * e1 + q[2] * e2 * e2 + q[3] * e3 * e3
        for i in range(len(action)):
            cost += ra[i] * action[i] * action[i]
        b = 0.0
        if e0 < th:
            b += bonus
        if e2 < th:
            b += bonus
        return -cost + b

    rng = SeededRng(42)
    spec = AugmentationSpec(n_copies=3, delta=2.0)
    for case in range(100):
        traj = random_traj(T=6, seed=case)
        for copy in augment_trajectory(traj, spec, WRIST_REWARD, rng):
            tgt = copy.obs[0, 4:6]
            for t in range(copy.length):
                expected = oracle(copy.outputs[t], tgt, copy.actions[t],
                                  (0.05, 0.2, 0.05, 0.2), (0.01, 0.01, 0.01), 0.5, 2.0)
                assert copy.rewards[t] == expected  # bit-exact


def test_single_target_per_trajectory():
    traj = random_traj(T=10, seed=5)
    rng = SeededRng(7)
    for copy in augment_trajectory(traj, AugmentationSpec(n_copies=8), WRIST_REWARD, rng):
        targets = copy.obs[:, 4:6]
        assert np.all(targets == targets[0])


def test_relabel_keeps_truncation_and_controller():
    traj = random_traj(seed=6)
    traj.controller = "pid"
    out = relabel_trajectory(traj, np.array([1.0, 2.0]), WRIST_REWARD)
    assert out.controller == "pid" and out.truncated is True


def test_invalid_augmentation_spec():
    with pytest.raises(ValueError):
        AugmentationSpec(n_copies=-1)
    with pytest.raises(ValueError):
        AugmentationSpec(delta=-0.1)


# -- bootstrap phase ----------------------------------------------------------


def tiny_cfg(**kw):
    base = dict(preset="wrist", seed=3, episodes=6, bootstrap_episodes=3,
                gru_hidden=8, augment_copies=2, out_dir="/tmp/musclerl-test-bootstrap")
    base.update(kw)
    return RunConfig(**base)


def test_bootstrap_zero_episodes_leaves_buffer_empty():
    tr = Trainer(tiny_cfg(bootstrap_episodes=0))
    tr.bootstrap_phase()
    assert len(tr.buffer) == 0


def test_bootstrap_fills_buffer_with_n_plus_one_per_episode():
    tr = Trainer(tiny_cfg())
    tr.bootstrap_phase()
    assert tr.episode_idx == 3
    assert len(tr.buffer) == 3 * (2 + 1)
    tags = [t.controller for t in tr.buffer.snapshot()]
    assert set(tags) == {"pid"}


def test_bootstrap_random_mode_when_disabled():
    tr = Trainer(tiny_cfg(no_bootstrap=True))
    tr.bootstrap_phase()
    assert {t.controller for t in tr.buffer.snapshot()} == {"random"}


def test_stored_rewards_match_recomputation_from_outputs():
    tr = Trainer(tiny_cfg())
    tr.bootstrap_phase()
    for traj in tr.buffer.snapshot():
        tgt = traj.obs[0, 4:6]
        for t in range(traj.length):
            assert traj.rewards[t] == reward(WRIST_REWARD, traj.outputs[t], tgt,
                                             traj.actions[t])
