import numpy as np
import pytest

from musclerl.muscle import SCP_NOMINAL, TCA_NOMINAL
from musclerl.randomize import (
    DEFAULT_INTERVALS,
    NO_RANDOMIZATION,
    RANDOMIZED_NAMES,
    RandomizationSpec,
    SeededRng,
    apply_observation_noise,
    sample_muscle_params,
    sample_muscle_set,
)


def test_degenerate_intervals_return_nominal_exactly():
    spec = RandomizationSpec(intervals={n: (1.0, 1.0) for n in RANDOMIZED_NAMES})
    out = sample_muscle_params(SCP_NOMINAL, spec, SeededRng(3))
    assert out == SCP_NOMINAL


def test_scp_stiffness_stays_in_scaled_interval():
    spec = RandomizationSpec()
    rng = SeededRng(11)
    for _ in range(2000):
        p = sample_muscle_params(SCP_NOMINAL, spec, rng)
        assert 0.20 <= p.k <= 0.30


def test_support_containment_all_parameters():
    spec = RandomizationSpec()
    rng = SeededRng(12)
    nominal = TCA_NOMINAL
    lo_hi = dict(DEFAULT_INTERVALS)
    draws = {n: [] for n in RANDOMIZED_NAMES}
    for _ in range(10_000):
        p = sample_muscle_params(nominal, spec, rng)
        for n in RANDOMIZED_NAMES:
            v = getattr(p, n) / getattr(nominal, n)
            lo, hi = lo_hi[n]
            assert lo <= v <= hi
            draws[n].append(v)
        assert p.x0 == nominal.x0 and p.T_amb == nominal.T_amb
    # empirical mean of each scaling factor within 1 % of 1
    for n in RANDOMIZED_NAMES:
        assert abs(np.mean(draws[n]) - 1.0) < 0.01


def test_same_seed_gives_bitwise_identical_draws():
    spec = RandomizationSpec()
    a = sample_muscle_params(SCP_NOMINAL, spec, SeededRng(99))
    b = sample_muscle_params(SCP_NOMINAL, spec, SeededRng(99))
    assert a == b
    set_a = sample_muscle_set((TCA_NOMINAL,) * 3, spec, SeededRng(5))
    set_b = sample_muscle_set((TCA_NOMINAL,) * 3, spec, SeededRng(5))
    assert set_a == set_b
    assert set_a[0] != set_a[1]  # independent per muscle


def test_shared_scaling_applies_same_factors():
    spec = RandomizationSpec(shared_across_muscles=True)
    muscles = sample_muscle_set((TCA_NOMINAL,) * 3, spec, SeededRng(5))
    assert muscles[0] == muscles[1] == muscles[2]


def test_split_streams_are_independent():
    root = SeededRng(42)
    a = root.split("one").uniform(size=5)
    b = root.split("two").uniform(size=5)
    a2 = SeededRng(42).split("one").uniform(size=5)
    assert np.array_equal(a, a2)
    assert not np.array_equal(a, b)


def test_zero_noise_returns_observation_unchanged():
    obs = np.array([1.0, -2.0, 3.0, 0.5, 7.0, -7.0])
    rngs = [SeededRng(0).split(str(i)) for i in range(4)]
    out = apply_observation_noise(obs, NO_RANDOMIZATION, rngs)
    assert np.array_equal(out, obs)


def test_noise_touches_only_motion_components():
    spec = RandomizationSpec()
    rngs = [SeededRng(1).split(str(i)) for i in range(4)]
    obs = np.array([0.0, 0.0, 0.0, 0.0, 4.5, -3.25])
    for _ in range(50):
        out = apply_observation_noise(obs, spec, rngs)
        assert out[4] == 4.5 and out[5] == -3.25
        assert not np.array_equal(out[:4], obs[:4])


def test_noise_empirical_sd_and_independence():
    spec = RandomizationSpec()
    rngs = [SeededRng(2).split(str(i)) for i in range(4)]
    obs = np.zeros(6)
    n = 100_000
    angle_noise = np.empty(n)
    for i in range(n):
        angle_noise[i] = apply_observation_noise(obs, spec, rngs)[0]
    sd = angle_noise.std()
    assert 0.097 <= sd <= 0.103
    x = angle_noise - angle_noise.mean()
    lag1 = float(np.dot(x[:-1], x[1:]) / np.dot(x, x))
    assert abs(lag1) < 0.02


def test_variance_multiplier_scales_intervals_and_noise():
    base = RandomizationSpec()
    assert base.effective_interval("k") == (0.8, 1.2)
    doubled = RandomizationSpec(variance_multiplier=2.0)
    lo, hi = doubled.effective_interval("k")
    assert lo == pytest.approx(0.6) and hi == pytest.approx(1.4)
    assert doubled.effective_noise_sds() == (0.2, 0.1)
    frozen = RandomizationSpec(variance_multiplier=0.0)
    assert frozen.effective_interval("k") == (1.0, 1.0)
    assert frozen.effective_noise_sds() == (0.0, 0.0)
    # positivity clamp engages for extreme multipliers
    extreme = RandomizationSpec(variance_multiplier=10.0)
    lo, hi = extreme.effective_interval("k")
    assert lo == 0.05 and hi == pytest.approx(3.0)


def test_invalid_specs_rejected():
    with pytest.raises(ValueError):
        RandomizationSpec(intervals={"k": (0.0, 1.0)})
    with pytest.raises(ValueError):
        RandomizationSpec(angle_noise_sd=-1.0)


def test_rng_state_roundtrip():
    rng = SeededRng(123)
    rng.uniform(size=7)
    state = rng.get_state()
    a = rng.uniform(size=5)
    rng2 = SeededRng(0)
    rng2.set_state(state)
    assert np.array_equal(rng2.uniform(size=5), a)
