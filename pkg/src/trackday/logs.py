"""Episode trajectory logs: columnar samples plus episode metadata.

One sample is appended at reset and one per environment step, all at the
fixed ``dt_env`` spacing. The JSON serialization round-trips float64
values exactly (shortest-repr encoding), which the determinism and
replay tests rely on.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Union

import numpy as np

_COLUMNS = (
    "sim_time",
    "x",
    "y",
    "v",
    "yaw",
    "accel_cmd",
    "steer_cmd",
    "progress",
    "lateral",
    "wheels_out",
)


@dataclass
class TrajectoryLog:
    """Timestamped episode samples in column-major layout.

    ``progress`` is the unwrapped centerline progress since spawn in
    meters; ``lateral`` the signed offset from the centerline; and
    ``wheels_out`` the number of wheels outside the drivable area at the
    sample time. ``meta`` carries track name, laps_required, dt_env,
    termination_reason, and a config hash.
    """

    sim_time: np.ndarray
    x: np.ndarray
    y: np.ndarray
    v: np.ndarray
    yaw: np.ndarray
    accel_cmd: np.ndarray
    steer_cmd: np.ndarray
    progress: np.ndarray
    lateral: np.ndarray
    wheels_out: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        n = self.sim_time.shape[0]
        for name in _COLUMNS:
            col = np.asarray(getattr(self, name))
            if col.shape != (n,):
                raise ValueError(f"log column {name} has shape {col.shape}, expected ({n},)")
            setattr(self, name, col)

    def __len__(self) -> int:
        return int(self.sim_time.shape[0])

    @property
    def dt(self) -> float:
        return float(self.meta.get("dt_env", self.sim_time[1] - self.sim_time[0]))

    def validate(self) -> None:
        """Check the sampling invariants (>= 2 samples, uniform spacing)."""
        if len(self) < 2:
            raise ValueError("trajectory log needs at least 2 samples")
        diffs = np.diff(self.sim_time)
        if np.any(diffs <= 0.0):
            raise ValueError("sim_time must be strictly increasing")
        if np.max(np.abs(diffs - self.dt)) > 1e-9:
            raise ValueError("sim_time spacing is not uniform")

    def positions(self) -> np.ndarray:
        """(N, 2) array of rear-axle positions."""
        return np.column_stack([self.x, self.y])

    def to_json_dict(self) -> dict:
        return {
            "meta": self.meta,
            "samples": {name: np.asarray(getattr(self, name)).tolist() for name in _COLUMNS},
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "TrajectoryLog":
        samples = doc["samples"]
        cols = {name: np.asarray(samples[name], dtype=np.float64) for name in _COLUMNS}
        cols["wheels_out"] = np.asarray(samples["wheels_out"], dtype=np.int64)
        return cls(meta=dict(doc.get("meta", {})), **cols)

    def save(self, path: Union[str, Path]) -> None:
        Path(path).write_text(json.dumps(self.to_json_dict()), encoding="utf-8")

    @classmethod
    def load(cls, path: Union[str, Path]) -> "TrajectoryLog":
        return cls.from_json_dict(json.loads(Path(path).read_text(encoding="utf-8")))


class LogBuilder:
    """Incremental trajectory-log accumulator used by the engine."""

    def __init__(self, meta: dict | None = None):
        self.meta = dict(meta or {})
        self._rows: dict[str, list] = {name: [] for name in _COLUMNS}

    def append(self, **values) -> None:
        for name in _COLUMNS:
            self._rows[name].append(values[name])

    def __len__(self) -> int:
        return len(self._rows["sim_time"])

    def build(self) -> TrajectoryLog:
        cols = {
            name: np.asarray(self._rows[name], dtype=np.float64) for name in _COLUMNS
        }
        cols["wheels_out"] = np.asarray(self._rows["wheels_out"], dtype=np.int64)
        return TrajectoryLog(meta=dict(self.meta), **cols)
