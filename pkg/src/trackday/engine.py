"""Episodic simulation engine: spawn, step, reward, and termination.

An episode runs until the required laps are complete, at least two
wheels leave the drivable area, net progress over a trailing window is
insufficient, or a step limit is hit. Each step clamps the incoming
command, applies the acceleration cap, integrates the vehicle, updates
progress and lap accounting, and assembles the 30-slot multimodal
observation (plus an optional pseudo-camera image).

Observation vector layout (index: content):
  0 steering request | 1 gear request | 2 mode (constant 0)
  3-5 velocity ENU m/s | 6-8 acceleration ENU m/s^2 (finite difference)
  9-11 angular velocity rad/s (z only) | 12-14 yaw, pitch, roll rad
  15-17 vehicle-center coordinates in (north, east, up) order, m
  18-21 wheel RPM | 22-25 wheel brake | 26-29 wheel torque

Pitch, roll, and the up-axis values are constant zero in this planar
simulator; "mode" is a constant-zero placeholder channel.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Optional

import numpy as np

from . import dynamics
from .camera import Camera, CameraConfig
from .dynamics import ActionCommand, Gear, VehicleParams, VehicleState
from .library import resolve_track
from .logs import LogBuilder, TrajectoryLog
from .track import TrackIndex

OBSERVATION_SIZE = 30

# canonical names for the 30 observation slots, index order
OBSERVATION_SLOTS = (
    "steering_request",
    "gear_request",
    "mode",
    "velocity_east_mps",
    "velocity_north_mps",
    "velocity_up_mps",
    "acceleration_east_mps2",
    "acceleration_north_mps2",
    "acceleration_up_mps2",
    "angular_velocity_x_radps",
    "angular_velocity_y_radps",
    "angular_velocity_z_radps",
    "yaw_rad",
    "pitch_rad",
    "roll_rad",
    "center_north_m",
    "center_east_m",
    "center_up_m",
    "wheel_rpm_fl",
    "wheel_rpm_fr",
    "wheel_rpm_rl",
    "wheel_rpm_rr",
    "wheel_brake_fl",
    "wheel_brake_fr",
    "wheel_brake_rl",
    "wheel_brake_rr",
    "wheel_torque_fl",
    "wheel_torque_fr",
    "wheel_torque_rl",
    "wheel_torque_rr",
)


class TerminationReason(str, Enum):
    NONE = "none"
    LAPS_COMPLETE = "laps_complete"
    OUT_OF_BOUNDS = "out_of_bounds"
    INSUFFICIENT_PROGRESS = "insufficient_progress"
    STEP_LIMIT = "step_limit"


class EpisodeFinishedError(RuntimeError):
    """step() was called after the episode terminated."""


@dataclass(frozen=True)
class RewardConfig:
    """Dense progress reward with optional centering bonus and OOB penalty."""

    progress_weight: float = 1.0  # reward per meter of forward progress
    center_bonus_weight: float = 0.0  # reward per second at the centerline
    out_of_bounds_penalty: float = 50.0  # subtracted on terminal out-of-bounds


@dataclass(frozen=True)
class EpisodeConfig:
    """Everything needed to reproduce an episode (see module docs)."""

    track: str = "oval"  # bundled track name or path to a track JSON file
    spawn_progress: float = 0.0  # m along the centerline
    spawn_offset: float = 0.0  # m, signed lateral offset at spawn
    laps_required: int = 3
    dt_env: float = 0.1  # s, environment step
    max_wall_steps: int = 36000
    min_progress_window: float = 15.0  # s
    min_progress_distance: float = 1.0  # m
    accel_cap: float = 1.0  # fraction applied to positive acceleration commands
    reward: RewardConfig = field(default_factory=RewardConfig)
    vehicle: VehicleParams = field(default_factory=VehicleParams)
    camera: CameraConfig = field(default_factory=CameraConfig)
    seed: Optional[int] = None

    def __post_init__(self) -> None:
        if self.laps_required < 1:
            raise ValueError("laps_required must be >= 1")
        if self.dt_env <= 0.0:
            raise ValueError("dt_env must be > 0")
        if not 0.0 < self.accel_cap <= 1.0:
            raise ValueError("accel_cap must be in (0, 1]")
        if self.max_wall_steps < 1:
            raise ValueError("max_wall_steps must be >= 1")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, doc: dict) -> "EpisodeConfig":
        doc = dict(doc)
        if "reward" in doc and isinstance(doc["reward"], dict):
            doc["reward"] = RewardConfig(**doc["reward"])
        if "vehicle" in doc and isinstance(doc["vehicle"], dict):
            doc["vehicle"] = VehicleParams(**doc["vehicle"])
        if "camera" in doc and isinstance(doc["camera"], dict):
            doc["camera"] = CameraConfig(**doc["camera"])
        return cls(**doc)

    @classmethod
    def from_file(cls, path) -> "EpisodeConfig":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

    def config_hash(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


@dataclass(frozen=True)
class SimState:
    """Snapshot of the episode state after a step."""

    vehicle: VehicleState
    sim_time: float
    progress_s: float  # projected arc position on the track, [0, total)
    unwrapped_progress: float  # net progress since spawn, m
    lateral_offset: float  # signed offset from centerline, m
    laps_done: int
    wheels_out: int
    done: bool
    termination_reason: TerminationReason


@dataclass
class Observation:
    """Multimodal observation: 30-slot vector plus optional image."""

    multimodal: np.ndarray
    sim_time: float
    image: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        self.multimodal = np.asarray(self.multimodal, dtype=np.float64)
        if self.multimodal.shape != (OBSERVATION_SIZE,):
            raise ValueError(
                f"multimodal vector must have shape ({OBSERVATION_SIZE},), "
                f"got {self.multimodal.shape}"
            )


def check_termination(
    state: SimState,
    config: EpisodeConfig,
    window_progress: Optional[float],
    steps_taken: int,
) -> TerminationReason:
    """Evaluate the termination rules in priority order.

    ``window_progress`` is the net progress over the trailing
    ``min_progress_window`` seconds, or None while the episode is still
    shorter than the window. One wheel out is unsafe but not terminal.
    """
    if state.laps_done >= config.laps_required:
        return TerminationReason.LAPS_COMPLETE
    if state.wheels_out >= 2:
        return TerminationReason.OUT_OF_BOUNDS
    if window_progress is not None and window_progress < config.min_progress_distance:
        return TerminationReason.INSUFFICIENT_PROGRESS
    if steps_taken >= config.max_wall_steps:
        return TerminationReason.STEP_LIMIT
    return TerminationReason.NONE


def compute_reward(
    prev: SimState,
    next_state: SimState,
    reward: RewardConfig,
    dt_env: float,
    half_width: float,
) -> float:
    """Progress reward, optional centering bonus, and terminal OOB penalty."""
    delta = next_state.unwrapped_progress - prev.unwrapped_progress
    value = reward.progress_weight * delta
    if reward.center_bonus_weight != 0.0:
        centering = max(0.0, 1.0 - abs(next_state.lateral_offset) / half_width)
        value += reward.center_bonus_weight * centering * dt_env
    if next_state.termination_reason is TerminationReason.OUT_OF_BOUNDS:
        value -= reward.out_of_bounds_penalty
    return value


class Engine:
    """Single-episode simulation engine (externally synchronized).

    Deterministic: identical (config, action sequence) pairs produce
    bit-identical trajectory logs. Step info keys are stable:
    ``sim_time``, ``progress_s``, ``unwrapped_progress_m``, ``lap``,
    ``lateral_offset_m``, ``wheels_out``, ``termination_reason``,
    ``delta_progress_m``, ``action_nonfinite``.
    """

    def __init__(self, config: EpisodeConfig, index: Optional[TrackIndex] = None):
        self.config = config
        if index is None:
            spec = resolve_track(config.track)
            index = TrackIndex(spec)
        self.index = index
        self._camera = Camera(index, config.camera, config.vehicle) if config.camera.enabled else None
        self._state: Optional[SimState] = None
        self._log: Optional[LogBuilder] = None
        self._steps = 0
        self._progress_history: list[float] = []
        self._prev_velocity = np.zeros(3)
        self._prev_yaw = 0.0

    @property
    def state(self) -> SimState:
        if self._state is None:
            raise RuntimeError("reset() has not been called")
        return self._state

    @property
    def done(self) -> bool:
        return self._state is None or self._state.done

    def reset(self) -> Observation:
        """Start a fresh episode at the configured standing-start pose."""
        cfg = self.config
        point, heading, _ = self.index.sample_centerline(cfg.spawn_progress)
        normal = np.array([-math.sin(heading), math.cos(heading)])
        position = point + cfg.spawn_offset * normal
        vehicle = VehicleState(float(position[0]), float(position[1]), 0.0, float(heading))

        proj = self.index.project((vehicle.x, vehicle.y))
        self._prev_s = proj.s
        wheels_out = self._count_wheels_out(vehicle)
        self._state = SimState(
            vehicle=vehicle,
            sim_time=0.0,
            progress_s=proj.s,
            unwrapped_progress=0.0,
            lateral_offset=proj.d,
            laps_done=0,
            wheels_out=wheels_out,
            done=False,
            termination_reason=TerminationReason.NONE,
        )
        self._steps = 0
        self._progress_history = [0.0]
        self._prev_velocity = np.zeros(3)
        self._prev_yaw = vehicle.yaw
        self._log = LogBuilder(
            meta={
                "track": self.index.spec.name,
                "track_length": self.index.total_length,
                "laps_required": cfg.laps_required,
                "dt_env": cfg.dt_env,
                "spawn_s": proj.s,
                "termination_reason": TerminationReason.NONE.value,
                "config_hash": cfg.config_hash(),
            }
        )
        self._append_log_sample(ActionCommand(0.0, 0.0))
        return self._observe(ActionCommand(0.0, 0.0), np.zeros(3), 0.0)

    def step(self, action) -> tuple[Observation, float, bool, dict]:
        """Advance one environment step with the given action."""
        if self._state is None:
            raise RuntimeError("reset() has not been called")
        if self._state.done:
            raise EpisodeFinishedError(
                f"episode already finished ({self._state.termination_reason.value})"
            )
        cfg = self.config
        command, nonfinite = self._coerce_action(action)

        applied_accel = command.acceleration
        if applied_accel > 0.0:
            applied_accel *= cfg.accel_cap
        applied = ActionCommand(applied_accel, command.steering, command.gear)

        prev = self._state
        vehicle = dynamics.step(prev.vehicle, applied, cfg.dt_env, cfg.vehicle)

        proj = self.index.project((vehicle.x, vehicle.y))
        delta = proj.s - self._prev_s
        if self.index.closed:
            total = self.index.total_length
            delta = (delta + 0.5 * total) % total - 0.5 * total
        unwrapped = prev.unwrapped_progress + delta
        self._prev_s = proj.s
        laps_done = max(0, math.floor(unwrapped / self.index.total_length))

        wheels_out = self._count_wheels_out(vehicle)
        sim_time = prev.sim_time + cfg.dt_env
        self._steps += 1
        self._progress_history.append(unwrapped)

        interim = SimState(
            vehicle=vehicle,
            sim_time=sim_time,
            progress_s=proj.s,
            unwrapped_progress=unwrapped,
            lateral_offset=proj.d,
            laps_done=laps_done,
            wheels_out=wheels_out,
            done=False,
            termination_reason=TerminationReason.NONE,
        )
        reason = check_termination(
            interim, cfg, self._window_progress(), self._steps
        )
        state = replace(
            interim,
            done=reason is not TerminationReason.NONE,
            termination_reason=reason,
        )
        self._state = state

        wl, wr = self.index.half_widths_at(proj.s)
        half_width = wl if proj.d >= 0.0 else wr
        reward = compute_reward(prev, state, cfg.reward, cfg.dt_env, half_width)

        velocity = np.array(
            [vehicle.v * math.cos(vehicle.yaw), vehicle.v * math.sin(vehicle.yaw), 0.0]
        )
        yaw_rate = (vehicle.yaw - self._prev_yaw) / cfg.dt_env
        observation = self._observe(command, velocity, yaw_rate)
        self._prev_velocity = velocity
        self._prev_yaw = vehicle.yaw

        self._log.meta["termination_reason"] = reason.value
        self._append_log_sample(command)

        info = {
            "sim_time": sim_time,
            "progress_s": proj.s,
            "unwrapped_progress_m": unwrapped,
            "lap": laps_done,
            "lateral_offset_m": proj.d,
            "wheels_out": wheels_out,
            "termination_reason": reason.value,
            "delta_progress_m": delta,
            "action_nonfinite": nonfinite,
        }
        return observation, reward, state.done, info

    def trajectory_log(self) -> TrajectoryLog:
        """Episode log so far (reset sample plus one sample per step)."""
        if self._log is None:
            raise RuntimeError("reset() has not been called")
        return self._log.build()

    def render_camera(self, vehicle: Optional[VehicleState] = None) -> np.ndarray:
        """Render the pseudo-camera view of the given (or current) state."""
        camera = self._camera or Camera(self.index, self.config.camera, self.config.vehicle)
        self._camera = camera
        return camera.render(vehicle if vehicle is not None else self.state.vehicle)

    # -- internals ---------------------------------------------------------

    def _coerce_action(self, action) -> tuple[ActionCommand, bool]:
        if isinstance(action, ActionCommand):
            return dynamics.clamp_action(action.acceleration, action.steering, action.gear)
        accel, steer = float(action[0]), float(action[1])
        return dynamics.clamp_action(accel, steer)

    def _count_wheels_out(self, vehicle: VehicleState) -> int:
        wheels = dynamics.wheel_positions(vehicle, self.config.vehicle)
        return sum(1 for w in wheels if not self.index.is_inside_drivable(w))

    def _window_progress(self) -> Optional[float]:
        cfg = self.config
        k = int(round(cfg.min_progress_window / cfg.dt_env))
        if self._steps < k:
            return None
        return self._progress_history[-1] - self._progress_history[-1 - k]

    def _observe(self, command: ActionCommand, velocity: np.ndarray, yaw_rate: float) -> Observation:
        state = self._state
        vehicle = state.vehicle
        params = self.config.vehicle
        accel = (velocity - self._prev_velocity) / self.config.dt_env
        center_x, center_y = dynamics.body_center(vehicle, params)
        rpm = vehicle.v / (2.0 * math.pi * params.wheel_radius) * 60.0
        brake = max(0.0, -command.acceleration)
        torque = max(0.0, command.acceleration)

        vec = np.empty(OBSERVATION_SIZE)
        vec[0] = command.steering
        vec[1] = float(command.gear)
        vec[2] = 0.0  # mode placeholder
        vec[3:6] = velocity
        vec[6:9] = accel
        vec[9:12] = (0.0, 0.0, yaw_rate)
        vec[12] = vehicle.yaw_wrapped
        vec[13] = 0.0  # pitch
        vec[14] = 0.0  # roll
        vec[15] = center_y  # (north, east, up) slot order
        vec[16] = center_x
        vec[17] = 0.0
        vec[18:22] = rpm
        vec[22:26] = brake
        vec[26:30] = torque

        image = None
        if self._camera is not None:
            image = self._camera.render(vehicle)
        return Observation(multimodal=vec, sim_time=state.sim_time, image=image)

    def _append_log_sample(self, command: ActionCommand) -> None:
        state = self._state
        self._log.append(
            sim_time=state.sim_time,
            x=state.vehicle.x,
            y=state.vehicle.y,
            v=state.vehicle.v,
            yaw=state.vehicle.yaw,
            accel_cmd=command.acceleration,
            steer_cmd=command.steering,
            progress=state.unwrapped_progress,
            lateral=state.lateral_offset,
            wheels_out=state.wheels_out,
        )
