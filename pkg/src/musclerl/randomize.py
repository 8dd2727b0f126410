"""Per-episode muscle-parameter sampling and per-step observation noise.

Each of the six muscle constants {k, b, c, C_th, lambda_, R} is scaled by an
independent uniform factor drawn once per episode; resting length and ambient
temperature are never touched. Observation noise is zero-mean Gaussian, added
independently per step to the measured angles and angular velocities only.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .muscle import MuscleParams

RANDOMIZED_NAMES = ("k", "b", "c", "C_th", "lambda_", "R")


class SeededRng:
    """Counter-based deterministic random stream (Philox) with named splitting.

    Identical seed gives an identical draw sequence on every platform. Child
    streams are derived by hashing the parent key with a label, so each
    consumer (parameter sampling, each noise channel, policy sampling, ...)
    owns an independent stream.
    """

    def __init__(self, seed: int, _key: bytes | None = None):
        self.seed = int(seed)
        if _key is None:
            _key = hashlib.sha256(b"musclerl:" + str(int(seed)).encode()).digest()[:16]
        self._key = _key
        self.gen = np.random.Generator(np.random.Philox(key=int.from_bytes(_key, "little")))

    def split(self, label: str) -> "SeededRng":
        """Derive an independent child stream named by label."""
        child = hashlib.sha256(self._key + b"/" + label.encode()).digest()[:16]
        return SeededRng(self.seed, _key=child)

    def uniform(self, lo=0.0, hi=1.0, size=None):
        return self.gen.uniform(lo, hi, size=size)

    def normal(self, mean=0.0, sd=1.0, size=None):
        return self.gen.normal(mean, sd, size=size)

    def standard_normal(self, size=None):
        return self.gen.standard_normal(size=size)

    def choice_without_replacement(self, n: int, k: int) -> np.ndarray:
        return self.gen.choice(n, size=k, replace=False)

    def sign(self) -> float:
        return 1.0 if self.gen.uniform() < 0.5 else -1.0

    def get_state(self) -> dict:
        return {"key_hex": self._key.hex(), "bitgen": self.gen.bit_generator.state}

    def set_state(self, state: dict) -> None:
        self._key = bytes.fromhex(state["key_hex"])
        self.gen = np.random.Generator(np.random.Philox(key=int.from_bytes(self._key, "little")))
        self.gen.bit_generator.state = state["bitgen"]


@dataclass(frozen=True)
class RandomizationSpec:
    """Scaling intervals for the muscle constants plus observation-noise law.

    intervals maps parameter name -> (lo, hi) dimensionless multipliers.
    variance_multiplier m rescales interval half-widths about 1 and the noise
    SDs jointly, for robustness-vs-variance sweeps; interval ends are clamped
    below at 0.05 to keep parameters positive.
    """

    intervals: dict[str, tuple[float, float]] = field(
        default_factory=lambda: dict(DEFAULT_INTERVALS)
    )
    angle_noise_sd: float = 0.1
    velocity_noise_sd: float = 0.05
    variance_multiplier: float = 1.0
    shared_across_muscles: bool = False

    def __post_init__(self):
        for name, (lo, hi) in self.intervals.items():
            if not (0.0 < lo <= hi):
                raise ValueError(f"interval for {name} must satisfy 0 < lo <= hi, got ({lo}, {hi})")
        if self.angle_noise_sd < 0 or self.velocity_noise_sd < 0 or self.variance_multiplier < 0:
            raise ValueError("noise SDs and variance multiplier must be nonnegative")

    def effective_interval(self, name: str) -> tuple[float, float]:
        lo, hi = self.intervals[name]
        m = self.variance_multiplier
        return (max(1.0 - m * (1.0 - lo), 0.05), 1.0 + m * (hi - 1.0))

    def effective_noise_sds(self) -> tuple[float, float]:
        m = self.variance_multiplier
        return (self.angle_noise_sd * m, self.velocity_noise_sd * m)


DEFAULT_INTERVALS: tuple[tuple[str, tuple[float, float]], ...] = (
    ("k", (0.8, 1.2)),
    ("b", (0.9, 1.1)),
    ("c", (0.85, 1.15)),
    ("C_th", (0.8, 1.2)),
    ("lambda_", (0.85, 1.15)),
    ("R", (0.9, 1.1)),
)

NO_RANDOMIZATION = RandomizationSpec(
    intervals={name: (1.0, 1.0) for name in RANDOMIZED_NAMES},
    angle_noise_sd=0.0,
    velocity_noise_sd=0.0,
)


def sample_muscle_params(nominal: MuscleParams, spec: RandomizationSpec, rng: SeededRng) -> MuscleParams:
    """Draw one scaled parameter set; x0 and T_amb are copied unchanged."""
    factors = {}
    for name in RANDOMIZED_NAMES:
        lo, hi = spec.effective_interval(name)
        factors[name] = float(rng.uniform(lo, hi))
    return nominal.scaled(factors)


def sample_muscle_set(
    nominals: tuple[MuscleParams, ...], spec: RandomizationSpec, rng: SeededRng
) -> tuple[MuscleParams, ...]:
    """Sample all muscles of one robot for one episode.

    By default each muscle draws its own factors; with shared_across_muscles
    a single factor set scales every muscle.
    """
    if spec.shared_across_muscles:
        factors = {}
        for name in RANDOMIZED_NAMES:
            lo, hi = spec.effective_interval(name)
            factors[name] = float(rng.uniform(lo, hi))
        return tuple(p.scaled(factors) for p in nominals)
    return tuple(sample_muscle_params(p, spec, rng) for p in nominals)


def apply_observation_noise(
    obs: np.ndarray, spec: RandomizationSpec, channel_rngs: list[SeededRng]
) -> np.ndarray:
    """Perturb the four measured motion components of an observation.

    Layout is [angle1, rate1, angle2, rate2, target1, target2]; targets are
    never perturbed. One stream per measured channel.
    """
    if not np.all(np.isfinite(obs)):
        raise ValueError("observation must be finite")
    angle_sd, vel_sd = spec.effective_noise_sds()
    out = np.array(obs, dtype=np.float64, copy=True)
    sds = (angle_sd, vel_sd, angle_sd, vel_sd)
    for i in range(4):
        if sds[i] > 0.0:
            out[i] += float(channel_rngs[i].normal(0.0, sds[i]))
    return out
