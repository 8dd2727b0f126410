"""Rigid-body plants driven by string muscles: 2-DOF eye and parallel wrist.

Both plants are two independent rotational DOFs with small-angle linearized
muscle routing. A constant routing matrix G (muscles x 2) maps joint angles
to muscle lengths and, transposed, muscle tensions to joint torques:

    x_i    = x0_i - (G @ alpha_rad)_i        length of muscle i, cm
    xdot_i = -(G @ omega_rad)_i              length rate, cm/s
    tau    = G.T @ F                         joint torques, N*cm

Eye: four muscles in two antagonistic pairs, (m1, m2) on pitch and (m3, m4)
on yaw, signs chosen so that the second muscle of each pair pulls the axis
positive. Wrist: three muscles at 120 deg azimuthal spacing.

Joint dynamics per DOF: J alphaddot = tau - d alphadot - kappa alpha, with
angles hard-clamped at the travel limits (rate zeroed on contact). External
angle/rate units are degrees; integration runs in radians.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .muscle import MuscleParams, SCP_NOMINAL, TCA_NOMINAL

DEG = math.pi / 180.0


@dataclass(frozen=True)
class PlantConfig:
    """Geometry and rigid-body constants of one plant.

    J: inertia per DOF (torque-consistent units, N*cm*s^2/rad); d: viscous
    damping N*cm*s/rad; kappa: restoring stiffness N*cm/rad; r: moment arm cm;
    routing: (muscles x 2) matrix described above; muscles: per-muscle
    constants; angle_limit: travel limit, deg.
    """

    name: str
    J: float
    d: float
    kappa: float
    r: float
    routing: np.ndarray
    muscles: tuple[MuscleParams, ...]
    angle_limit: float = 25.0

    def __post_init__(self):
        if not (self.J > 0 and self.r > 0 and self.d >= 0 and self.kappa >= 0):
            raise ValueError("require J > 0, r > 0, d >= 0, kappa >= 0")
        routing = np.asarray(self.routing, dtype=np.float64)
        if routing.shape != (len(self.muscles), 2):
            raise ValueError("routing must be (n_muscles, 2)")
        object.__setattr__(self, "routing", routing)

    @property
    def n_muscles(self) -> int:
        return len(self.muscles)

    def with_muscles(self, muscles: tuple[MuscleParams, ...]) -> "PlantConfig":
        return replace(self, muscles=muscles)


@dataclass
class PlantState:
    """Joint angles (deg), angular rates (deg/s), muscle temperatures (degC)."""

    angles: np.ndarray
    rates: np.ndarray
    temps: np.ndarray

    def copy(self) -> "PlantState":
        return PlantState(self.angles.copy(), self.rates.copy(), self.temps.copy())


def eye_routing(r: float) -> np.ndarray:
    # rows: m1 (pitch -), m2 (pitch +), m3 (yaw -), m4 (yaw +)
    return np.array([[-r, 0.0], [r, 0.0], [0.0, -r], [0.0, r]])


def wrist_routing(r: float) -> np.ndarray:
    azimuths = np.array([90.0, 210.0, 330.0]) * DEG
    return np.stack([r * np.sin(azimuths), r * np.cos(azimuths)], axis=1)


# Default rigid-body constants are calibrated (scripts/ and the
# `calibrate-plant` CLI verb) so the stock PID gains give barely acceptable
# tracking: eye rise ~5 s, wrist rise ~10 s at a (5, 5) deg target.
def eye_config() -> PlantConfig:
    """2-DOF eyeball on two antagonistic coiled-polymer pairs."""
    r = 1.2
    return PlantConfig(
        name="eye", J=0.6, d=1.4, kappa=0.05, r=r,
        routing=eye_routing(r), muscles=(SCP_NOMINAL,) * 4,
    )


def wrist_config() -> PlantConfig:
    """Parallel wrist plate on three SMA-core muscles at 90/210/330 deg."""
    r = 1.2
    return PlantConfig(
        name="wrist", J=2.4, d=1.3, kappa=1.0, r=r,
        routing=wrist_routing(r), muscles=(TCA_NOMINAL,) * 3,
    )


PLANT_PRESETS = {"eye": eye_config, "wrist": wrist_config}


def configured_plant(
    preset: str,
    inertia: float | None = None,
    damping: float | None = None,
    stiffness: float | None = None,
    moment_arm: float | None = None,
    rest_length: float | None = None,
    angle_limit: float | None = None,
) -> PlantConfig:
    """Preset plant with selected constants overridden (config-file knobs).

    Changing the moment arm rebuilds the routing matrix; changing the rest
    length rebuilds the muscle set.
    """
    cfg = PLANT_PRESETS[preset]()
    kw = {}
    if inertia is not None:
        kw["J"] = inertia
    if damping is not None:
        kw["d"] = damping
    if stiffness is not None:
        kw["kappa"] = stiffness
    if angle_limit is not None:
        kw["angle_limit"] = angle_limit
    if moment_arm is not None:
        kw["r"] = moment_arm
        builder = eye_routing if preset == "eye" else wrist_routing
        kw["routing"] = builder(moment_arm)
    if rest_length is not None:
        kw["muscles"] = tuple(replace(p, x0=rest_length) for p in cfg.muscles)
    return replace(cfg, **kw) if kw else cfg


def initial_state(cfg: PlantConfig) -> PlantState:
    """Rest at zero angles and rates, every muscle at its ambient temperature."""
    temps = np.array([p.T_amb for p in cfg.muscles], dtype=np.float64)
    return PlantState(np.zeros(2), np.zeros(2), temps)


def muscle_kinematics(cfg: PlantConfig, angles_deg, rates_deg):
    """Per-muscle lengths (cm), length rates (cm/s), and the torque map G.

    Torque on the joints from tensions F is G.T @ F (N*cm).
    """
    alpha = np.asarray(angles_deg, dtype=np.float64) * DEG
    omega = np.asarray(rates_deg, dtype=np.float64) * DEG
    x0 = np.array([p.x0 for p in cfg.muscles])
    lengths = x0 - cfg.routing @ alpha
    rates = -(cfg.routing @ omega)
    return lengths, rates, cfg.routing.copy()


def _derivative(cfg, k_arr, b_arr, c_arr, Tamb_arr, Cth_arr, lam_arr, power,
                alpha, omega, temps, ext_torque):
    stretch = -(cfg.routing @ alpha)          # x - x0
    xdot = -(cfg.routing @ omega)
    forces = k_arr * stretch + b_arr * xdot + c_arr * (temps - Tamb_arr)
    tau = cfg.routing.T @ forces - cfg.d * omega - cfg.kappa * alpha
    if ext_torque is not None:
        tau = tau + ext_torque
    domega = tau / cfg.J
    dtemps = (power - lam_arr * (temps - Tamb_arr)) / Cth_arr
    return omega, domega, dtemps


def plant_step(
    cfg: PlantConfig,
    state: PlantState,
    voltages: np.ndarray,
    dt: float,
    external_torque: np.ndarray | None = None,
) -> PlantState:
    """One explicit RK4 step of the coupled joint + thermal dynamics.

    Voltages must already lie in [0, 10] (the action mapping clamps); the
    angle clamp with rate zeroing applies after the step. external_torque
    (N*cm per DOF) is a test hook, not used in normal operation.
    """
    if not (dt > 0.0):
        raise ValueError(f"dt must be positive, got {dt}")
    v = np.asarray(voltages, dtype=np.float64)
    if v.shape != (cfg.n_muscles,):
        raise ValueError(f"expected {cfg.n_muscles} voltages, got shape {v.shape}")
    if np.any(v < 0.0) or np.any(v > 10.0) or not np.all(np.isfinite(v)):
        raise ValueError(f"voltages out of range [0, 10]: {v}")

    k_arr = np.array([p.k for p in cfg.muscles])
    b_arr = np.array([p.b for p in cfg.muscles])
    c_arr = np.array([p.c for p in cfg.muscles])
    Tamb_arr = np.array([p.T_amb for p in cfg.muscles])
    Cth_arr = np.array([p.C_th for p in cfg.muscles])
    lam_arr = np.array([p.lambda_ for p in cfg.muscles])
    R_arr = np.array([p.R for p in cfg.muscles])
    power = v * v / R_arr

    alpha = state.angles * DEG
    omega = state.rates * DEG
    temps = state.temps

    def f(a, w, T):
        return _derivative(cfg, k_arr, b_arr, c_arr, Tamb_arr, Cth_arr,
                           lam_arr, power, a, w, T, external_torque)

    k1a, k1w, k1T = f(alpha, omega, temps)
    k2a, k2w, k2T = f(alpha + 0.5 * dt * k1a, omega + 0.5 * dt * k1w, temps + 0.5 * dt * k1T)
    k3a, k3w, k3T = f(alpha + 0.5 * dt * k2a, omega + 0.5 * dt * k2w, temps + 0.5 * dt * k2T)
    k4a, k4w, k4T = f(alpha + dt * k3a, omega + dt * k3w, temps + dt * k3T)

    alpha = alpha + dt * (k1a + 2.0 * k2a + 2.0 * k3a + k4a) / 6.0
    omega = omega + dt * (k1w + 2.0 * k2w + 2.0 * k3w + k4w) / 6.0
    temps = temps + dt * (k1T + 2.0 * k2T + 2.0 * k3T + k4T) / 6.0

    angles = alpha / DEG
    rates = omega / DEG
    lim = cfg.angle_limit
    for i in range(2):
        if angles[i] > lim:
            angles[i] = lim
            if rates[i] > 0.0:
                rates[i] = 0.0
        elif angles[i] < -lim:
            angles[i] = -lim
            if rates[i] < 0.0:
                rates[i] = 0.0
    return PlantState(angles, rates, temps)


def advance(
    cfg: PlantConfig,
    state: PlantState,
    voltages: np.ndarray,
    dt: float,
    substeps: int,
    external_torque: np.ndarray | None = None,
) -> PlantState:
    """Integrate `substeps` RK4 steps of dt with voltages held constant.

    Same dynamics as plant_step, unrolled to scalar arithmetic: the rollout
    loop spends most of its time here and the state is a handful of floats,
    where numpy dispatch costs more than the math.
    """
    if not (dt > 0.0 and substeps >= 1):
        raise ValueError("require dt > 0 and substeps >= 1")
    v = np.asarray(voltages, dtype=np.float64)
    m = cfg.n_muscles
    if v.shape != (m,):
        raise ValueError(f"expected {m} voltages, got shape {v.shape}")
    if np.any(v < 0.0) or np.any(v > 10.0) or not np.all(np.isfinite(v)):
        raise ValueError(f"voltages out of range [0, 10]: {v}")

    g1 = tuple(float(cfg.routing[i, 0]) for i in range(m))
    g2 = tuple(float(cfg.routing[i, 1]) for i in range(m))
    mk = tuple(p.k for p in cfg.muscles)
    mb = tuple(p.b for p in cfg.muscles)
    mc = tuple(p.c for p in cfg.muscles)
    tamb = tuple(p.T_amb for p in cfg.muscles)
    lam_c = tuple(p.lambda_ / p.C_th for p in cfg.muscles)
    pow_c = tuple(float(v[i]) ** 2 / cfg.muscles[i].R / cfg.muscles[i].C_th for i in range(m))
    d, kappa, J = cfg.d, cfg.kappa, cfg.J
    ext1 = ext2 = 0.0
    if external_torque is not None:
        ext1, ext2 = float(external_torque[0]), float(external_torque[1])
    lim = cfg.angle_limit * DEG

    a1, a2 = float(state.angles[0]) * DEG, float(state.angles[1]) * DEG
    w1, w2 = float(state.rates[0]) * DEG, float(state.rates[1]) * DEG
    temps = [float(t) for t in state.temps]
    rng_m = range(m)

    def deriv(b1, b2, u1, u2, T):
        tau1 = ext1 - d * u1 - kappa * b1
        tau2 = ext2 - d * u2 - kappa * b2
        dT = [0.0] * m
        for i in rng_m:
            gi1, gi2 = g1[i], g2[i]
            dTi = T[i] - tamb[i]
            f = -mk[i] * (gi1 * b1 + gi2 * b2) - mb[i] * (gi1 * u1 + gi2 * u2) + mc[i] * dTi
            tau1 += gi1 * f
            tau2 += gi2 * f
            dT[i] = pow_c[i] - lam_c[i] * dTi
        return u1, u2, tau1 / J, tau2 / J, dT

    sixth = dt / 6.0
    half = 0.5 * dt
    for _ in range(substeps):
        k1 = deriv(a1, a2, w1, w2, temps)
        k2 = deriv(a1 + half * k1[0], a2 + half * k1[1], w1 + half * k1[2], w2 + half * k1[3],
                   [temps[i] + half * k1[4][i] for i in rng_m])
        k3 = deriv(a1 + half * k2[0], a2 + half * k2[1], w1 + half * k2[2], w2 + half * k2[3],
                   [temps[i] + half * k2[4][i] for i in rng_m])
        k4 = deriv(a1 + dt * k3[0], a2 + dt * k3[1], w1 + dt * k3[2], w2 + dt * k3[3],
                   [temps[i] + dt * k3[4][i] for i in rng_m])
        a1 += sixth * (k1[0] + 2.0 * (k2[0] + k3[0]) + k4[0])
        a2 += sixth * (k1[1] + 2.0 * (k2[1] + k3[1]) + k4[1])
        w1 += sixth * (k1[2] + 2.0 * (k2[2] + k3[2]) + k4[2])
        w2 += sixth * (k1[3] + 2.0 * (k2[3] + k3[3]) + k4[3])
        temps = [temps[i] + sixth * (k1[4][i] + 2.0 * (k2[4][i] + k3[4][i]) + k4[4][i])
                 for i in rng_m]
        if a1 > lim:
            a1 = lim
            if w1 > 0.0:
                w1 = 0.0
        elif a1 < -lim:
            a1 = -lim
            if w1 < 0.0:
                w1 = 0.0
        if a2 > lim:
            a2 = lim
            if w2 > 0.0:
                w2 = 0.0
        elif a2 < -lim:
            a2 = -lim
            if w2 < 0.0:
                w2 = 0.0

    return PlantState(
        np.array([a1 / DEG, a2 / DEG]),
        np.array([w1 / DEG, w2 / DEG]),
        np.array(temps),
    )


def mechanical_energy(cfg: PlantConfig, state: PlantState) -> float:
    """Kinetic + joint-spring + muscle-spring energy (N*cm), for passivity checks."""
    alpha = state.angles * DEG
    omega = state.rates * DEG
    stretch = -(cfg.routing @ alpha)
    k_arr = np.array([p.k for p in cfg.muscles])
    return float(
        0.5 * cfg.J * (omega @ omega)
        + 0.5 * cfg.kappa * (alpha @ alpha)
        + 0.5 * np.sum(k_arr * stretch * stretch)
    )
