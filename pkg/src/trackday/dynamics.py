"""Kinematic bicycle model: command mapping, integration, and footprint.

State is the rear-axle pose (east, north), forward speed, and yaw
measured counter-clockwise from east. Dimensionless commands in [-1, 1]
map to physical units through the gain parameters: acceleration
``a = accel_gain * cmd`` (minus optional quadratic drag) and front
steering angle ``delta = steer_gain * cmd``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from . import kernels
from .geometry import wrap_to_pi

PHYSICS_SUBSTEP = 0.01  # s; inner RK4 resolution under the environment step


class Gear(IntEnum):
    PARK = 0
    DRIVE = 1
    NEUTRAL = 2
    REVERSE = 3


class DynamicsDivergedError(RuntimeError):
    """Integration produced a non-finite state (configuration bug)."""


@dataclass(frozen=True)
class VehicleParams:
    """Physical parameters of the simulated vehicle."""

    wheelbase: float = 2.7  # m, rear to front axle
    accel_gain: float = 10.0  # m/s^2 per unit acceleration command
    steer_gain: float = 0.3  # rad per unit steering command
    track_width: float = 1.6  # m, left-right wheel separation
    wheel_radius: float = 0.3  # m
    drag_coeff: float = 0.0  # 1/m, quadratic speed drag (0 disables)

    def __post_init__(self) -> None:
        if self.wheelbase <= 0.0:
            raise ValueError("wheelbase must be > 0")
        if self.accel_gain <= 0.0:
            raise ValueError("accel_gain must be > 0")
        if not 0.0 < self.steer_gain <= math.pi / 2.0:
            raise ValueError("steer_gain must be in (0, pi/2]")
        if self.track_width <= 0.0:
            raise ValueError("track_width must be > 0")
        if self.wheel_radius <= 0.0:
            raise ValueError("wheel_radius must be > 0")
        if self.drag_coeff < 0.0:
            raise ValueError("drag_coeff must be >= 0")


@dataclass(frozen=True)
class ActionCommand:
    """Dimensionless acceleration/steering commands plus gear selection."""

    acceleration: float
    steering: float
    gear: Gear = Gear.DRIVE


@dataclass(frozen=True)
class VehicleState:
    """Rear-axle pose, speed, and unwrapped yaw."""

    x: float  # m east
    y: float  # m north
    v: float  # m/s, >= 0
    yaw: float  # rad, counter-clockwise from east, stored unwrapped

    def __post_init__(self) -> None:
        for name in ("x", "y", "v", "yaw"):
            if not math.isfinite(getattr(self, name)):
                raise DynamicsDivergedError(f"non-finite state field {name}")
        if self.v < 0.0:
            raise ValueError("speed must be >= 0")

    @property
    def yaw_wrapped(self) -> float:
        """Yaw wrapped to (-pi, pi] for reporting."""
        return wrap_to_pi(self.yaw)


def clamp_action(acceleration: float, steering: float, gear: Gear = Gear.DRIVE) -> tuple[ActionCommand, bool]:
    """Clamp raw commands to [-1, 1]; non-finite inputs map to 0.

    Returns the clamped command and a flag that is True when any input
    was non-finite (surfaced as a warning in the step info).
    """
    nonfinite = False

    def clamp(value: float) -> float:
        nonlocal nonfinite
        value = float(value)
        if not math.isfinite(value):
            nonfinite = True
            return 0.0
        return min(max(value, -1.0), 1.0)

    return ActionCommand(clamp(acceleration), clamp(steering), gear), nonfinite


def derivatives(
    state: VehicleState, action: ActionCommand, params: VehicleParams
) -> tuple[float, float, float, float]:
    """Continuous-time state rate (dx, dy, dv, dyaw) of the bicycle model."""
    delta = params.steer_gain * action.steering
    dx = state.v * math.cos(state.yaw)
    dy = state.v * math.sin(state.yaw)
    dv = params.accel_gain * action.acceleration - params.drag_coeff * state.v**2
    dyaw = state.v * math.tan(delta) / params.wheelbase
    return dx, dy, dv, dyaw


def step(
    state: VehicleState, action: ActionCommand, dt: float, params: VehicleParams
) -> VehicleState:
    """Integrate one environment step with RK4 substeps.

    Substep count is ceil(dt / 0.01 s); speed is floored at zero after
    each substep. Raises :class:`DynamicsDivergedError` on non-finite
    results.
    """
    if dt <= 0.0:
        raise ValueError("dt must be > 0")
    n_sub = max(1, math.ceil(dt / PHYSICS_SUBSTEP - 1e-9))
    x, y, v, yaw = kernels.bike_rk4(
        state.x,
        state.y,
        state.v,
        state.yaw,
        action.acceleration,
        action.steering,
        params.accel_gain,
        params.steer_gain,
        params.drag_coeff,
        params.wheelbase,
        dt,
        n_sub,
    )
    if not all(math.isfinite(f) for f in (x, y, v, yaw)):
        raise DynamicsDivergedError(
            f"integration diverged: x={x} y={y} v={v} yaw={yaw}"
        )
    return VehicleState(x, y, v, yaw)


def wheel_positions(state: VehicleState, params: VehicleParams) -> np.ndarray:
    """World positions of the four wheel centers.

    Order is [front-left, front-right, rear-left, rear-right]; rear
    wheels sit on the rear axle at the state position.
    """
    half = params.track_width / 2.0
    body = np.array(
        [
            [params.wheelbase, half],
            [params.wheelbase, -half],
            [0.0, half],
            [0.0, -half],
        ]
    )
    c, s = math.cos(state.yaw), math.sin(state.yaw)
    rot = np.array([[c, -s], [s, c]])
    return body @ rot.T + np.array([state.x, state.y])


def body_center(state: VehicleState, params: VehicleParams) -> tuple[float, float]:
    """Vehicle center (wheelbase midpoint), reported in observations."""
    half = params.wheelbase / 2.0
    return (
        state.x + half * math.cos(state.yaw),
        state.y + half * math.sin(state.yaw),
    )
