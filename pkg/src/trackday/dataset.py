"""Episode recording and replay in a documented container format.

A session is a directory holding ``manifest.json`` plus ``records.bin``,
a sequence of length-prefixed step records (little-endian):

    u32 record length   (covers everything after itself)
    f64 sim_time
    30 x f64            observation vector, slot order per the manifest
    2 x f64             action [acceleration, steering]
    raw image bytes     row-major uint8, dims per the manifest (may be 0)

One record is written per environment step, pairing the observation the
policy saw with the action it chose. All floats are stored bit-exact,
so read(record(x)) is an identity and recorded actions replayed through
the engine reproduce the recorded pose slots.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Optional, Union

import numpy as np

from .dynamics import ActionCommand
from .engine import OBSERVATION_SIZE, OBSERVATION_SLOTS, Engine, EpisodeConfig

SCHEMA_VERSION = 1
_LENGTH = struct.Struct("<I")
_SIM_TIME = struct.Struct("<d")
_FIXED_BODY = 8 + OBSERVATION_SIZE * 8 + 2 * 8


class DatasetError(RuntimeError):
    """Corrupt or inconsistent session data; carries the record index."""

    def __init__(self, message: str, record_index: Optional[int] = None):
        self.record_index = record_index
        super().__init__(message)


@dataclass
class SessionManifest:
    """Everything needed to parse records.bin without reading code."""

    track: str
    episode_config: dict
    image_width: int
    image_height: int
    image_channels: int
    sample_period_s: float
    record_count: int = 0
    episode_record_counts: list[int] = field(default_factory=list)
    truncated: Optional[str] = None
    schema_version: int = SCHEMA_VERSION
    sensor_index_map: tuple = OBSERVATION_SLOTS

    @property
    def image_bytes(self) -> int:
        return self.image_width * self.image_height * self.image_channels

    @property
    def record_bytes(self) -> int:
        return _FIXED_BODY + self.image_bytes

    def to_json_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "track": self.track,
            "episode_config": self.episode_config,
            "sensor_index_map": list(self.sensor_index_map),
            "image": {
                "width": self.image_width,
                "height": self.image_height,
                "channels": self.image_channels,
            },
            "sample_period_s": self.sample_period_s,
            "record_count": self.record_count,
            "episode_record_counts": self.episode_record_counts,
            "truncated": self.truncated,
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "SessionManifest":
        image = doc.get("image", {})
        manifest = cls(
            track=doc["track"],
            episode_config=doc["episode_config"],
            image_width=int(image.get("width", 0)),
            image_height=int(image.get("height", 0)),
            image_channels=int(image.get("channels", 0)),
            sample_period_s=float(doc["sample_period_s"]),
            record_count=int(doc["record_count"]),
            episode_record_counts=list(doc.get("episode_record_counts", [])),
            truncated=doc.get("truncated"),
            schema_version=int(doc.get("schema_version", SCHEMA_VERSION)),
            sensor_index_map=tuple(doc.get("sensor_index_map", OBSERVATION_SLOTS)),
        )
        if manifest.sensor_index_map != OBSERVATION_SLOTS:
            raise DatasetError("sensor index map does not match the 30-slot table")
        return manifest


@dataclass
class StepRecord:
    """One (observation, action) sample."""

    sim_time: float
    multimodal: np.ndarray  # (30,) float64
    action: np.ndarray  # (2,) float64: [acceleration, steering]
    image: bytes = b""

    def to_bytes(self) -> bytes:
        body = (
            _SIM_TIME.pack(self.sim_time)
            + np.ascontiguousarray(self.multimodal, dtype="<f8").tobytes()
            + np.ascontiguousarray(self.action, dtype="<f8").tobytes()
            + self.image
        )
        return _LENGTH.pack(len(body)) + body

    @classmethod
    def from_body(cls, body: bytes) -> "StepRecord":
        sim_time = _SIM_TIME.unpack_from(body, 0)[0]
        multimodal = np.frombuffer(body, dtype="<f8", count=OBSERVATION_SIZE, offset=8).copy()
        action = np.frombuffer(
            body, dtype="<f8", count=2, offset=8 + OBSERVATION_SIZE * 8
        ).copy()
        return cls(
            sim_time=sim_time, multimodal=multimodal, action=action,
            image=body[_FIXED_BODY:],
        )


def record_session(
    policy,
    config: EpisodeConfig,
    out_dir: Union[str, Path],
    episodes: int = 1,
) -> SessionManifest:
    """Run episodes with a policy, writing manifest.json and records.bin.

    The policy must expose ``act(observation) -> (ActionCommand, info)``
    and may expose ``reset(seed)``. A policy exception truncates the
    session: whatever was recorded stays valid and the manifest carries
    a truncation marker.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    camera = config.camera
    manifest = SessionManifest(
        track=config.track,
        episode_config=config.to_dict(),
        image_width=camera.width if camera.enabled else 0,
        image_height=camera.height if camera.enabled else 0,
        image_channels=camera.channels if camera.enabled else 0,
        sample_period_s=config.dt_env,
    )
    with open(out / "records.bin", "wb") as fh:
        for episode_idx in range(episodes):
            engine = Engine(config)
            observation = engine.reset()
            if hasattr(policy, "reset"):
                seed = None if config.seed is None else config.seed + episode_idx
                policy.reset(seed)
            written = 0
            while not engine.done:
                try:
                    action, _ = policy.act(observation)
                except Exception as exc:
                    manifest.truncated = f"policy failure in episode {episode_idx}: {exc}"
                    break
                record = StepRecord(
                    sim_time=observation.sim_time,
                    multimodal=observation.multimodal,
                    action=np.array([action.acceleration, action.steering]),
                    image=observation.image.tobytes() if observation.image is not None else b"",
                )
                fh.write(record.to_bytes())
                written += 1
                observation, _, _, _ = engine.step(action)
            manifest.episode_record_counts.append(written)
            manifest.record_count += written
            if manifest.truncated is not None:
                break
    (out / "manifest.json").write_text(
        json.dumps(manifest.to_json_dict(), indent=2), encoding="utf-8"
    )
    return manifest


def read_manifest(session_dir: Union[str, Path]) -> SessionManifest:
    path = Path(session_dir) / "manifest.json"
    if not path.exists():
        raise DatasetError(f"no manifest.json in {session_dir}")
    return SessionManifest.from_json_dict(json.loads(path.read_text(encoding="utf-8")))


def read_session(session_dir: Union[str, Path]) -> Iterator[StepRecord]:
    """Stream records lazily, validating sizes against the manifest."""
    manifest = read_manifest(session_dir)
    expected = manifest.record_bytes
    index = 0
    with open(Path(session_dir) / "records.bin", "rb") as fh:
        while True:
            head = fh.read(_LENGTH.size)
            if not head:
                break
            if len(head) < _LENGTH.size:
                raise DatasetError(f"truncated length prefix at record {index}", index)
            (length,) = _LENGTH.unpack(head)
            if length != expected:
                raise DatasetError(
                    f"record {index} length {length} != manifest record size {expected}",
                    index,
                )
            body = fh.read(length)
            if len(body) < length:
                raise DatasetError(f"truncated body at record {index}", index)
            yield StepRecord.from_body(body)
            index += 1
    if index != manifest.record_count:
        raise DatasetError(
            f"manifest declares {manifest.record_count} records, found {index}", index
        )


class ReplayPolicy:
    """Plays back the recorded action stream of a session."""

    def __init__(self, session_dir: Union[str, Path]):
        self.manifest = read_manifest(session_dir)
        self._actions = [record.action for record in read_session(session_dir)]
        self._cursor = 0

    def __len__(self) -> int:
        return len(self._actions)

    def reset(self, seed: Optional[int] = None) -> None:
        self._cursor = 0

    def act(self, observation) -> tuple[ActionCommand, dict]:
        if self._cursor >= len(self._actions):
            raise IndexError("replay exhausted: no more recorded actions")
        action = self._actions[self._cursor]
        self._cursor += 1
        return ActionCommand(float(action[0]), float(action[1])), {"replay_index": self._cursor - 1}
