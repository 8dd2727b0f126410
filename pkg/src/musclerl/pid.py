"""Discrete PID setpoint controller used to seed the replay buffer.

Per controlled axis, with error e in degrees and step dt in seconds:

    I <- clamp(I + e dt, +-integral_limit)
    u  = Kp e + Ki I + Kd (e - e_prev) / dt

The eye takes u directly as its signed pair command. The wrist maps the
two axis commands to three nonnegative voltages through the pseudo-inverse
of the small-angle torque map, then clamps to [0, 10] per muscle. Gains are
deliberately mediocre: the controller only has to reach the neighbourhood
of the target, not track it well.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .plant import PlantConfig


@dataclass(frozen=True)
class PidGains:
    """Per-axis gains (shared by both axes) with anti-windup and output clamps."""

    kp: float
    ki: float
    kd: float
    output_limit: float
    integral_limit: float | None = None

    def __post_init__(self):
        if self.kp < 0 or self.ki < 0 or self.kd < 0:
            raise ValueError("PID gains must be nonnegative")

    @property
    def i_clamp(self) -> float:
        if self.integral_limit is not None:
            return self.integral_limit
        # default: integral term alone can just saturate the output
        return self.output_limit / self.ki if self.ki > 0 else 0.0


# Stock gains for the two plants. The eye's axis command is already an
# action component (|u| <= 10). The wrist's axis command saturates where the
# mapped primary-muscle voltage hits the box edge: the pseudo-inverse divides
# by 1.5 r, so the limit is 15 r.
EYE_GAINS = PidGains(kp=2.1, ki=0.2, kd=0.5, output_limit=10.0)
WRIST_GAINS = PidGains(kp=3.3, ki=0.5, kd=0.3, output_limit=18.0)


def gains_for(preset: str, plant: PlantConfig | None = None, scale: float = 1.0) -> PidGains:
    if preset == "eye":
        g = EYE_GAINS
    elif plant is not None:
        g = PidGains(kp=WRIST_GAINS.kp, ki=WRIST_GAINS.ki, kd=WRIST_GAINS.kd,
                     output_limit=15.0 * plant.r)
    else:
        g = WRIST_GAINS
    if scale == 1.0:
        return g
    return PidGains(kp=g.kp * scale, ki=g.ki * scale, kd=g.kd * scale,
                    output_limit=g.output_limit, integral_limit=g.integral_limit)


class PidController:
    """Two-axis PID with clamped integral state; one instance per episode."""

    def __init__(self, gains: PidGains, n_axes: int = 2):
        self.gains = gains
        self.integral = np.zeros(n_axes)
        self.prev_error = np.zeros(n_axes)

    def reset(self) -> None:
        self.integral[:] = 0.0
        self.prev_error[:] = 0.0

    def update(self, error, dt: float) -> np.ndarray:
        """Axis commands for the current per-axis error (deg)."""
        if not (dt > 0.0):
            raise ValueError("dt must be positive")
        e = np.asarray(error, dtype=np.float64)
        g = self.gains
        self.integral = np.clip(self.integral + e * dt, -g.i_clamp, g.i_clamp)
        u = g.kp * e + g.ki * self.integral + g.kd * (e - self.prev_error) / dt
        self.prev_error = e.copy()
        return np.clip(u, -g.output_limit, g.output_limit)


def wrist_axis_to_action(cfg: PlantConfig, u) -> np.ndarray:
    """Map two axis commands to three voltages via the torque-map pseudo-inverse."""
    pinv = np.linalg.pinv(cfg.routing.T)
    return np.clip(pinv @ np.asarray(u, dtype=np.float64), 0.0, 10.0)


class PidActionPolicy:
    """Adapter producing environment actions from observations.

    Reads the angle and target slots of the observation, runs the PID on the
    per-axis error, and converts the axis commands to the preset's action.
    """

    def __init__(self, preset: str, plant: PlantConfig, gains: PidGains | None = None):
        self.preset = preset
        self.plant = plant
        self.gains = gains or gains_for(preset, plant)
        self.pid = PidController(self.gains)

    def reset(self) -> None:
        self.pid.reset()

    def act(self, obs, dt: float = 0.5) -> np.ndarray:
        error = np.array([obs[4] - obs[0], obs[5] - obs[2]])
        u = self.pid.update(error, dt)
        if self.preset == "eye":
            return np.clip(u, -10.0, 10.0)
        return wrist_axis_to_action(self.plant, u)
