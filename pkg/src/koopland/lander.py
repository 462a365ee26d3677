"""Planar rigid-body simulator of a thruster lander.

The craft has a main engine firing along its body +y axis (no torque) and a
rotational thruster pair that applies a lateral body-frame force at a lever
arm below the center of mass, producing torque. Integration is semi-implicit
Euler with a fixed number of substeps per 10 Hz log step, so identical inputs
give bitwise-identical outputs.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass

log = logging.getLogger(__name__)


class SimulationError(ValueError):
    """Raised when the simulator is fed a non-finite state."""


@dataclass(frozen=True)
class LanderState:
    """Rigid-body state: position (m), heading (rad, 0 = upright, CCW
    positive), linear velocity (m/s) and angular velocity (rad/s)."""

    x: float
    y: float
    theta: float
    vx: float
    vy: float
    omega: float

    def as_tuple(self) -> tuple[float, float, float, float, float, float]:
        return (self.x, self.y, self.theta, self.vx, self.vy, self.omega)

    def is_finite(self) -> bool:
        return all(math.isfinite(v) for v in self.as_tuple())


@dataclass(frozen=True)
class ControlInput:
    """Thruster command: main throttle u1 in [0, 1], rotational throttle u2
    in [-1, 1]. The main engine only pushes (u1 >= 0); the left engine fires
    for u2 < 0, the right for u2 > 0."""

    u1: float
    u2: float

    def as_tuple(self) -> tuple[float, float]:
        return (self.u1, self.u2)

    def is_finite(self) -> bool:
        return math.isfinite(self.u1) and math.isfinite(self.u2)

    def clamped(self) -> tuple["ControlInput", bool]:
        """Return the command projected into saturation bounds and whether
        anything actually changed."""
        u1 = min(max(self.u1, 0.0), 1.0)
        u2 = min(max(self.u2, -1.0), 1.0)
        changed = (u1 != self.u1) or (u2 != self.u2)
        return (ControlInput(u1, u2) if changed else self), changed


ZERO_CONTROL = ControlInput(0.0, 0.0)


@dataclass(frozen=True)
class SimConfig:
    """Physical constants, trial-initialization parameters and terminal
    thresholds.

    The defaults give a thrust-to-weight ratio of about 1.5 and a craft that
    is hard for a novice but reliably landable with practice. World frame is
    x in [0, world_w], y in [0, world_h] with the pad region centered.
    """

    mass: float = 10.0            # kg
    inertia: float = 10.0         # kg m^2
    gravity: float = 9.81         # m/s^2
    main_thrust_max: float = 150.0  # N
    side_thrust_max: float = 30.0   # N
    side_lever_arm: float = 1.0     # m
    dt_log: float = 0.1           # s, 10 Hz logging/control cadence
    substeps: int = 6
    start_x: float = 10.0
    start_y: float = 13.3
    start_noise_sigma: float = 0.2  # m, zero-mean Gaussian on x and y
    kick_force_range: float = 1000.0  # N, uniform per-axis startup impulse
    goal_x: float = 10.0
    goal_y: float = 6.0
    goal_radius: float = 0.9      # m
    velocity_threshold: float = 1.0   # m/s, per linear axis
    omega_threshold: float = 0.3      # rad/s
    upright_threshold: float = 0.25   # rad
    timeout: float = 60.0         # s, trial failure cutoff
    crash_height: float = 0.5     # m, ground contact at lander half-height
    world_w: float = 20.0
    world_h: float = 16.0
    seed: int = 0

    def __post_init__(self) -> None:
        if min(self.mass, self.inertia, self.main_thrust_max,
               self.side_thrust_max, self.dt_log) <= 0:
            raise ValueError("mass, inertia, thrust limits and dt_log must be positive")
        if self.substeps < 1:
            raise ValueError("substeps must be >= 1")
        if self.goal_radius <= 0 or min(self.velocity_threshold,
                                        self.omega_threshold,
                                        self.upright_threshold) <= 0:
            raise ValueError("goal radius and terminal thresholds must be positive")

    @property
    def goal(self) -> tuple[float, float]:
        return (self.goal_x, self.goal_y)

    @property
    def hover_throttle(self) -> float:
        """Main throttle that exactly cancels gravity when upright."""
        return self.mass * self.gravity / self.main_thrust_max


class TrialStatus(enum.Enum):
    RUNNING = "Running"
    SUCCESS = "Success"
    CRASH = "Crash"
    OUT_OF_BOUNDS = "OutOfBounds"
    TIMEOUT = "Timeout"

    @property
    def terminal(self) -> bool:
        return self is not TrialStatus.RUNNING


def reset(config: SimConfig, rng) -> LanderState:
    """Initialize a trial: the start position gets zero-mean Gaussian noise
    on x and y, and a random force drawn uniformly per axis from
    [-kick_force_range, +kick_force_range] acts on the center of mass for one
    log step, which sets the initial velocity. Heading and spin start at zero.

    ``rng`` is a numpy Generator (or anything with ``normal`` / ``uniform``);
    the draw order (noise x, noise y, kick x, kick y) is frozen so a given
    seed always produces the same trial.
    """
    nx = rng.normal(0.0, config.start_noise_sigma) if config.start_noise_sigma > 0 else 0.0
    ny = rng.normal(0.0, config.start_noise_sigma) if config.start_noise_sigma > 0 else 0.0
    r = config.kick_force_range
    fx = rng.uniform(-r, r) if r > 0 else 0.0
    fy = rng.uniform(-r, r) if r > 0 else 0.0
    # impulse J = F * dt applied at the center of mass: dv = J / m
    scale = config.dt_log / config.mass
    return LanderState(
        x=config.start_x + nx,
        y=config.start_y + ny,
        theta=0.0,
        vx=fx * scale,
        vy=fy * scale,
        omega=0.0,
    )


def step(state: LanderState, control: ControlInput, config: SimConfig) -> LanderState:
    """Advance one log step (dt_log) with ``substeps`` semi-implicit Euler
    sub-integrations.

    Forces, in the world frame with heading theta:
      * main engine: u1 * main_thrust_max along body +y = (-sin t, cos t),
        through the center of mass (no torque);
      * rotational thrusters: mounted side_lever_arm above the center of
        mass, pushing along body -x for positive u2, so the craft feels
        torque u2 * side_thrust_max * side_lever_arm plus the rotated
        lateral force (-u2 * side_thrust_max along body x);
      * gravity: -mass * gravity in world y.
    """
    if not state.is_finite():
        raise SimulationError(f"non-finite state passed to step: {state}")
    clamped, changed = control.clamped()
    if changed:
        log.warning("control %s outside saturation bounds, clamped to %s",
                    control.as_tuple(), clamped.as_tuple())
    u1, u2 = clamped.u1, clamped.u2

    m = config.mass
    h = config.dt_log / config.substeps
    f_main = u1 * config.main_thrust_max
    f_side = -u2 * config.side_thrust_max  # body-frame x component
    torque = u2 * config.side_thrust_max * config.side_lever_arm
    alpha = torque / config.inertia

    x, y, theta = state.x, state.y, state.theta
    vx, vy, omega = state.vx, state.vy, state.omega
    for _ in range(config.substeps):
        s, c = math.sin(theta), math.cos(theta)
        ax = (-f_main * s + f_side * c) / m
        ay = (f_main * c + f_side * s) / m - config.gravity
        vx += ax * h
        vy += ay * h
        omega += alpha * h
        x += vx * h
        y += vy * h
        theta += omega * h
    return LanderState(x, y, theta, vx, vy, omega)


def classify(state: LanderState, elapsed: float, config: SimConfig) -> TrialStatus:
    """Terminal-condition check, precedence Success > Crash > OutOfBounds >
    Timeout.

    Success requires the craft center inside the goal circle with both linear
    speeds, the spin rate and the heading below their thresholds. Crash is
    ground contact (y at or below crash_height) without success; OutOfBounds
    is leaving the world to the left or right.
    """
    if not state.is_finite():
        raise SimulationError(f"non-finite state passed to classify: {state}")
    dist = math.hypot(state.x - config.goal_x, state.y - config.goal_y)
    if (dist < config.goal_radius
            and abs(state.vx) < config.velocity_threshold
            and abs(state.vy) < config.velocity_threshold
            and abs(state.omega) < config.omega_threshold
            and abs(state.theta) < config.upright_threshold):
        return TrialStatus.SUCCESS
    if state.y <= config.crash_height:
        return TrialStatus.CRASH
    if not 0.0 <= state.x <= config.world_w:
        return TrialStatus.OUT_OF_BOUNDS
    if elapsed >= config.timeout:
        return TrialStatus.TIMEOUT
    return TrialStatus.RUNNING


__all__ = [
    "ControlInput",
    "LanderState",
    "SimConfig",
    "SimulationError",
    "TrialStatus",
    "ZERO_CONTROL",
    "classify",
    "reset",
    "step",
]
