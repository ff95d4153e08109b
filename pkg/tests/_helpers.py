"""Shared construction helpers for the test suite."""

from __future__ import annotations

import math

import numpy as np

from trackday.logs import TrajectoryLog
from trackday.track import TrackIndex, TrackSpec


def straight_spec(length: float = 100.0, n: int = 101, half_width: float = 5.0) -> TrackSpec:
    """Open straight track along the east axis starting at the origin."""
    xs = np.linspace(0.0, length, n)
    centerline = np.column_stack([xs, np.zeros_like(xs)])
    return TrackSpec(
        name="straight",
        centerline=centerline,
        half_width_left=half_width,
        half_width_right=half_width,
        closed=False,
    )


def circle_spec(
    radius: float = 30.0, n: int = 720, half_width: float = 5.0, center=(0.0, 0.0)
) -> TrackSpec:
    """Closed circular track traversed counter-clockwise."""
    theta = np.linspace(0.0, 2.0 * math.pi, n, endpoint=False)
    centerline = np.column_stack(
        [center[0] + radius * np.cos(theta), center[1] + radius * np.sin(theta)]
    )
    return TrackSpec(
        name="circle",
        centerline=centerline,
        half_width_left=half_width,
        half_width_right=half_width,
        closed=True,
    )


def octagon_points(radius: float = 1.0) -> np.ndarray:
    theta = np.linspace(0.0, 2.0 * math.pi, 8, endpoint=False)
    return np.column_stack([radius * np.cos(theta), radius * np.sin(theta)])


def make_log(
    v,
    progress,
    lateral=None,
    wheels_out=None,
    dt: float = 0.1,
    x=None,
    y=None,
    yaw=None,
    meta=None,
) -> TrajectoryLog:
    """Assemble a synthetic trajectory log from whatever columns matter."""
    v = np.asarray(v, dtype=np.float64)
    n = v.shape[0]
    progress = np.asarray(progress, dtype=np.float64)
    zeros = np.zeros(n)
    base_meta = {"laps_required": 3, "dt_env": dt, "termination_reason": "none"}
    base_meta.update(meta or {})
    return TrajectoryLog(
        sim_time=np.arange(n) * dt,
        x=np.asarray(x, dtype=np.float64) if x is not None else zeros.copy(),
        y=np.asarray(y, dtype=np.float64) if y is not None else zeros.copy(),
        v=v,
        yaw=np.asarray(yaw, dtype=np.float64) if yaw is not None else zeros.copy(),
        accel_cmd=zeros.copy(),
        steer_cmd=zeros.copy(),
        progress=progress,
        lateral=np.asarray(lateral, dtype=np.float64) if lateral is not None else zeros.copy(),
        wheels_out=(
            np.asarray(wheels_out, dtype=np.int64) if wheels_out is not None else np.zeros(n, dtype=np.int64)
        ),
        meta=base_meta,
    )


def centerline_following_log(
    index: TrackIndex, speed: float = 12.5, laps: float = 1.0, dt: float = 0.1
) -> TrajectoryLog:
    """Synthetic log of a vehicle gliding exactly along the centerline."""
    total = index.total_length * laps
    n = int(math.floor(total / (speed * dt))) + 1
    progress = np.arange(n) * speed * dt
    xs, ys, yaws = [], [], []
    for s in progress:
        point, heading, _ = index.sample_centerline(s)
        xs.append(point[0])
        ys.append(point[1])
        yaws.append(heading)
    v = np.full(n, speed)
    v[0] = speed  # constant-speed profile, no standing start
    return make_log(
        v,
        progress,
        x=np.array(xs),
        y=np.array(ys),
        yaw=np.array(yaws),
        dt=dt,
        meta={"track": index.spec.name, "track_length": index.total_length, "spawn_s": 0.0},
    )
