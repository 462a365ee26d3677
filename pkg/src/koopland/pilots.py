"""Scripted surrogate operators.

The expert is a cascaded proportional-derivative law: horizontal error sets
a desired tilt, the side thruster tracks that tilt, and the main thruster
regulates vertical motion with the tilt compensated. The novice runs the
same law through delayed observations, additive control noise and a slowly
wandering bias, calibrated so that on its own it lands only about one trial
in ten.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

from .lander import ControlInput, LanderState, SimConfig


@dataclass(frozen=True)
class PilotGains:
    """Expert-law gains. Defaults are tuned for the default SimConfig."""

    kp_x: float = 0.40
    kd_x: float = 1.00
    ax_max: float = 8.0        # m/s^2, horizontal acceleration demand cap
    tilt_max: float = 0.80     # rad
    kp_att: float = 12.0
    kd_att: float = 7.0
    kp_y: float = 0.55
    kd_y: float = 1.5
    ay_min: float = 1.0        # m/s^2, keeps the thrust direction defined
    retro_speed: float = 2.5   # m/s, above this brake against the velocity
    retro_gain: float = 3.0
    retro_tilt_max: float = 1.25


@dataclass(frozen=True)
class PilotConfig:
    """Pilot selection plus novice degradation parameters.

    ``noise_main`` / ``noise_side`` are per-step Gaussian control noise
    sigmas, ``delay_steps`` the observation lag, and the bias is a
    mean-reverting random walk (per-step decay ``drift_decay``, innovation
    sigma ``drift_sigma``) added to the side channel.
    """

    kind: str = "novice"
    noise_main: float = 0.15
    noise_side: float = 0.30
    delay_steps: int = 2
    drift_sigma: float = 0.08
    drift_decay: float = 0.995

    def __post_init__(self) -> None:
        if self.kind not in ("expert", "novice"):
            raise ValueError(f"unknown pilot kind {self.kind!r}")
        if self.noise_main < 0 or self.noise_side < 0 or self.drift_sigma < 0:
            raise ValueError("noise sigmas must be non-negative")
        if self.delay_steps < 0:
            raise ValueError("delay must be non-negative")


class ExpertPilot:
    """Deterministic landing law; reliably reaches the goal circle."""

    name = "expert"

    def __init__(self, sim: SimConfig, gains: PilotGains = PilotGains()):
        self.sim = sim
        self.gains = gains

    def command(self, state: LanderState) -> ControlInput:
        g = self.gains
        sim = self.sim
        speed = math.hypot(state.vx, state.vy)
        if speed > g.retro_speed:
            # kick recovery: burn against the velocity, gravity compensated
            ax_des = -g.retro_gain * state.vx
            ay_des = -g.retro_gain * state.vy + sim.gravity
            ay_des = max(ay_des, g.ay_min)
            tilt_cap = g.retro_tilt_max
        else:
            # terminal approach: world-frame PD toward the goal
            ax_des = g.kp_x * (sim.goal_x - state.x) - g.kd_x * state.vx
            ax_des = min(max(ax_des, -g.ax_max), g.ax_max)
            ay_des = g.kp_y * (sim.goal_y - state.y) - g.kd_y * state.vy + sim.gravity
            ay_des = max(ay_des, g.ay_min)
            tilt_cap = g.tilt_max
        # main thrust acts along (-sin t, cos t): tilt toward the demand
        tilt = math.atan2(-ax_des, ay_des)
        tilt = min(max(tilt, -tilt_cap), tilt_cap)
        alpha_max = sim.side_thrust_max * sim.side_lever_arm / sim.inertia
        u2 = (g.kp_att * (tilt - state.theta) - g.kd_att * state.omega) / alpha_max
        u2 = min(max(u2, -1.0), 1.0)
        # throttle realizes the demand projected on the current thrust axis
        s, c = math.sin(state.theta), math.cos(state.theta)
        a_along = -ax_des * s + ay_des * c
        u1 = a_along * sim.mass / sim.main_thrust_max
        u1 = min(max(u1, 0.0), 1.0)
        return ControlInput(u1, u2)


class NovicePilot:
    """Expert law degraded by observation delay, control noise and bias.

    With all degradation parameters at zero this reproduces the expert
    exactly. The rng draw order per step is frozen (bias innovation, main
    noise, side noise) so a seed fully determines the control sequence.
    """

    name = "novice"

    def __init__(self, sim: SimConfig, config: PilotConfig, rng):
        self.expert = ExpertPilot(sim)
        self.config = config
        self.rng = rng
        self._buffer: deque[LanderState] = deque(maxlen=config.delay_steps + 1)
        self._bias_side = 0.0

    def command(self, state: LanderState) -> ControlInput:
        cfg = self.config
        self._buffer.append(state)
        observed = self._buffer[0]
        base = self.expert.command(observed)
        if cfg.drift_sigma > 0:
            self._bias_side = (cfg.drift_decay * self._bias_side
                               + self.rng.normal(0.0, cfg.drift_sigma))
        u1, u2 = base.u1, base.u2 + self._bias_side
        if cfg.noise_main > 0:
            u1 += self.rng.normal(0.0, cfg.noise_main)
        if cfg.noise_side > 0:
            u2 += self.rng.normal(0.0, cfg.noise_side)
        return ControlInput(min(max(u1, 0.0), 1.0), min(max(u2, -1.0), 1.0))


def make_pilot(config: PilotConfig, sim: SimConfig, rng):
    if config.kind == "expert":
        return ExpertPilot(sim)
    return NovicePilot(sim, config, rng)


__all__ = [
    "ExpertPilot",
    "NovicePilot",
    "PilotConfig",
    "PilotGains",
    "make_pilot",
]
