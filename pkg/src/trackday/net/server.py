"""Simulation server: UDP action ingest, multi-rate sensor/camera
publication with latest-value semantics, and a JSON-lines control channel.

Channel layout (one logical task per channel):

* action listener (UDP): decodes datagrams into a latest-value register;
  stale sequence numbers and malformed datagrams are dropped and counted.
* control channel (TCP, newline-delimited JSON): every command is routed
  through a queue to the step loop, which owns the engine exclusively.
* sensor channel (UDP out): the 30-slot vector at the sensor rate, sent
  to the configured target and any subscribed clients.
* camera channel (TCP out): length-prefixed frames at the camera rate;
  slow consumers are served from a depth-1 latest-frame queue and never
  block the step loop (except in lockstep, where delivery is synchronous
  and complete by design).

Pacing modes: ``realtime`` paces steps by the wall clock and publishes
from dedicated threads; ``fast`` steps as fast as possible; ``lockstep``
steps only on client ``step`` commands, which makes socket execution
bit-reproducible. The vehicle holds the last received action between
datagrams (zero-order hold; zero action before the first datagram).
"""

from __future__ import annotations

import json
import math
import queue
import socket
import threading
import time
from dataclasses import dataclass, field
from typing import Optional

from ..dynamics import ActionCommand, Gear
from ..engine import Engine, EpisodeConfig, Observation
from ..library import resolve_track
from ..track import TrackError
from . import wire
from .registers import LatestValueRegister

PACING_MODES = ("realtime", "fast", "lockstep")


@dataclass
class ServerConfig:
    """Ports, rates, pacing, and the episode template."""

    host: str = "127.0.0.1"
    action_port: int = 0  # 0 picks an ephemeral port
    control_port: int = 0
    camera_port: int = 0
    sensor_target: Optional[tuple[str, int]] = None
    sensor_rate_hz: float = 100.0
    camera_rate_hz: float = 20.0
    pacing: str = "lockstep"
    episode: EpisodeConfig = field(default_factory=EpisodeConfig)
    autostart: bool = True

    def __post_init__(self) -> None:
        if self.pacing not in PACING_MODES:
            raise ValueError(f"pacing must be one of {PACING_MODES}, got {self.pacing!r}")
        if self.sensor_rate_hz <= 0.0 or self.camera_rate_hz <= 0.0:
            raise ValueError("publication rates must be > 0")
        if self.camera_rate_hz > self.sensor_rate_hz:
            raise ValueError("camera rate must not exceed the sensor rate")
        explicit = [p for p in (self.action_port, self.control_port, self.camera_port) if p]
        if len(explicit) != len(set(explicit)):
            raise ValueError("explicit ports must be distinct")

    @classmethod
    def from_dict(cls, doc: dict) -> "ServerConfig":
        doc = dict(doc)
        if "episode" in doc and isinstance(doc["episode"], dict):
            doc["episode"] = EpisodeConfig.from_dict(doc["episode"])
        if doc.get("sensor_target") is not None:
            host, port = doc["sensor_target"]
            doc["sensor_target"] = (str(host), int(port))
        return cls(**doc)


def _merge_episode_config(base: EpisodeConfig, overrides: dict) -> EpisodeConfig:
    doc = base.to_dict()
    for key, value in overrides.items():
        if key in ("reward", "vehicle", "camera") and isinstance(value, dict):
            doc[key] = {**doc[key], **value}
        else:
            doc[key] = value
    return EpisodeConfig.from_dict(doc)


class _CameraConnection:
    """One camera consumer; realtime/fast sends run on a drop-oldest queue."""

    def __init__(self, conn: socket.socket, synchronous: bool):
        self.conn = conn
        self.synchronous = synchronous
        self.alive = True
        if not synchronous:
            self.queue: queue.Queue = queue.Queue(maxsize=1)
            self.thread = threading.Thread(target=self._drain, daemon=True)
            self.thread.start()

    def send(self, frame_bytes: bytes) -> None:
        if not self.alive:
            return
        if self.synchronous:
            try:
                self.conn.sendall(frame_bytes)
            except OSError:
                self.close()
            return
        try:
            self.queue.put_nowait(frame_bytes)
        except queue.Full:
            try:
                self.queue.get_nowait()  # drop the stale frame
            except queue.Empty:
                pass
            try:
                self.queue.put_nowait(frame_bytes)
            except queue.Full:
                pass

    def _drain(self) -> None:
        while self.alive:
            try:
                item = self.queue.get(timeout=0.2)
            except queue.Empty:
                continue
            if item is None:
                break
            try:
                self.conn.sendall(item)
            except OSError:
                break
        self.close()

    def close(self) -> None:
        self.alive = False
        if not self.synchronous:
            try:
                self.queue.put_nowait(None)
            except queue.Full:
                pass
        try:
            self.conn.close()
        except OSError:
            pass


class SimServer:
    """Runs the episodic engine behind the wire protocol until shutdown."""

    def __init__(self, config: ServerConfig):
        self.config = config
        self._engine: Optional[Engine] = None
        self._episode_config = config.episode
        self._vision_only = False
        self._initialized = False

        self._action_register = LatestValueRegister()
        self._state_register = LatestValueRegister()  # (Observation, vehicle state)
        self._commands: queue.Queue = queue.Queue()
        self._stop = threading.Event()
        self.episode_done = threading.Event()

        self._sensor_seq = 0
        self._camera_seq = 0
        self._sensor_published = 0
        self._camera_published = 0
        self._dropped_datagrams = 0
        self._last_info: dict = {}
        self._last_reward = 0.0

        self._sensor_targets: set[tuple[str, int]] = set()
        if config.sensor_target is not None:
            self._sensor_targets.add(tuple(config.sensor_target))
        self._camera_conns: list[_CameraConnection] = []
        self._conn_lock = threading.Lock()
        self._threads: list[threading.Thread] = []

    # -- lifecycle -----------------------------------------------------------

    def start(self) -> None:
        cfg = self.config
        self._action_sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        self._action_sock.bind((cfg.host, cfg.action_port))
        self._action_sock.settimeout(0.2)
        self._sensor_sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)

        self._control_sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._control_sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self._control_sock.bind((cfg.host, cfg.control_port))
        self._control_sock.listen(8)
        self._control_sock.settimeout(0.2)

        self._camera_sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._camera_sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self._camera_sock.bind((cfg.host, cfg.camera_port))
        self._camera_sock.listen(8)
        self._camera_sock.settimeout(0.2)

        if self.config.autostart:
            self._reset_engine({})

        targets = [
            ("action-listener", self._action_loop),
            ("control-accept", self._control_accept_loop),
            ("camera-accept", self._camera_accept_loop),
            ("step-loop", self._step_loop),
        ]
        if cfg.pacing == "realtime":
            targets.append(("sensor-publisher", self._realtime_sensor_loop))
            targets.append(("camera-publisher", self._realtime_camera_loop))
        for name, fn in targets:
            thread = threading.Thread(target=fn, name=f"trackday-{name}", daemon=True)
            thread.start()
            self._threads.append(thread)

    def stop(self) -> None:
        self._stop.set()
        for thread in self._threads:
            thread.join(timeout=2.0)
        for sock in (self._action_sock, self._sensor_sock, self._control_sock, self._camera_sock):
            try:
                sock.close()
            except OSError:
                pass
        with self._conn_lock:
            for conn in self._camera_conns:
                conn.close()
            self._camera_conns.clear()

    def __enter__(self) -> "SimServer":
        self.start()
        return self

    def __exit__(self, *exc) -> None:
        self.stop()

    @property
    def action_port(self) -> int:
        return self._action_sock.getsockname()[1]

    @property
    def control_port(self) -> int:
        return self._control_sock.getsockname()[1]

    @property
    def camera_port(self) -> int:
        return self._camera_sock.getsockname()[1]

    # -- channel threads -------------------------------------------------------

    def _action_loop(self) -> None:
        while not self._stop.is_set():
            try:
                data, addr = self._action_sock.recvfrom(4096)
            except socket.timeout:
                continue
            except OSError:
                break
            try:
                message = wire.decode_action(data)
            except wire.WireError:
                self._dropped_datagrams += 1
                continue
            if not self._action_register.set(message, seq=message.seq):
                self._dropped_datagrams += 1

    def _control_accept_loop(self) -> None:
        while not self._stop.is_set():
            try:
                conn, _ = self._control_sock.accept()
            except socket.timeout:
                continue
            except OSError:
                break
            thread = threading.Thread(
                target=self._control_connection, args=(conn,), daemon=True
            )
            thread.start()

    def _control_connection(self, conn: socket.socket) -> None:
        peer_host = conn.getpeername()[0]
        with conn, conn.makefile("rwb") as stream:
            while not self._stop.is_set():
                line = stream.readline()
                if not line:
                    break
                doc: dict = {}
                try:
                    doc = json.loads(line)
                    if not isinstance(doc, dict) or "cmd" not in doc:
                        raise ValueError("not a command object")
                except ValueError:
                    reply = {"status": "error", "reason": "bad_json"}
                else:
                    reply_q: queue.Queue = queue.Queue()
                    self._commands.put((doc, peer_host, reply_q))
                    try:
                        reply = reply_q.get(timeout=30.0)
                    except queue.Empty:
                        reply = {"status": "error", "reason": "server_busy"}
                try:
                    stream.write((json.dumps(reply) + "\n").encode("utf-8"))
                    stream.flush()
                except OSError:
                    break
                if doc.get("cmd") == "shutdown" and reply.get("status") == "ok":
                    break

    def _camera_accept_loop(self) -> None:
        synchronous = self.config.pacing == "lockstep"
        while not self._stop.is_set():
            try:
                conn, _ = self._camera_sock.accept()
            except socket.timeout:
                continue
            except OSError:
                break
            with self._conn_lock:
                self._camera_conns.append(_CameraConnection(conn, synchronous))

    def _realtime_sensor_loop(self) -> None:
        period = 1.0 / self.config.sensor_rate_hz
        next_tick = time.monotonic()
        while not self._stop.is_set():
            now = time.monotonic()
            if now < next_tick:
                time.sleep(min(next_tick - now, 0.05))
                continue
            next_tick += period
            self._publish_sensor_once()

    def _realtime_camera_loop(self) -> None:
        period = 1.0 / self.config.camera_rate_hz
        next_tick = time.monotonic()
        while not self._stop.is_set():
            now = time.monotonic()
            if now < next_tick:
                time.sleep(min(next_tick - now, 0.05))
                continue
            next_tick += period
            self._publish_camera_once()

    # -- publication ------------------------------------------------------------

    def _publish_sensor_once(self) -> None:
        payload, _, _ = self._state_register.get()
        if payload is None:
            return
        self._sensor_published += 1
        if not self._sensor_targets:
            return
        observation: Observation = payload[0]
        self._sensor_seq += 1
        message = wire.SensorMessage(
            seq=self._sensor_seq,
            sim_time=observation.sim_time,
            values=tuple(observation.multimodal),
        )
        data = wire.encode_sensor(message)
        for target in list(self._sensor_targets):
            try:
                self._sensor_sock.sendto(data, target)
            except OSError:
                pass

    def _publish_camera_once(self) -> None:
        payload, _, _ = self._state_register.get()
        engine = self._engine
        if payload is None or engine is None:
            return
        self._camera_published += 1
        with self._conn_lock:
            conns = [c for c in self._camera_conns if c.alive]
            self._camera_conns = conns
        if not conns:
            return
        observation, vehicle = payload
        image = engine.render_camera(vehicle)
        self._camera_seq += 1
        frame = wire.CameraFrame(
            seq=self._camera_seq,
            sim_time=observation.sim_time,
            width=image.shape[1],
            height=image.shape[0],
            channels=image.shape[2],
            pixels=image.tobytes(),
        )
        data = wire.encode_camera_frame(frame)
        for conn in conns:
            conn.send(data)

    def _publish_for_sim_time(self) -> None:
        """Deterministic per-step publication for fast/lockstep pacing."""
        engine = self._engine
        if engine is None:
            return
        sim_time = engine.state.sim_time
        sensor_due = int(math.floor(sim_time * self.config.sensor_rate_hz + 1e-9))
        while self._sensor_published < sensor_due:
            self._publish_sensor_once()
        camera_due = int(math.floor(sim_time * self.config.camera_rate_hz + 1e-9))
        while self._camera_published < camera_due:
            self._publish_camera_once()

    # -- step loop ---------------------------------------------------------------

    def _step_loop(self) -> None:
        cfg = self.config
        next_step = time.monotonic()
        while not self._stop.is_set():
            if cfg.pacing == "lockstep":
                try:
                    item = self._commands.get(timeout=0.1)
                except queue.Empty:
                    continue
                self._handle_command(*item)
                continue

            while True:
                try:
                    item = self._commands.get_nowait()
                except queue.Empty:
                    break
                self._handle_command(*item)
            if self._stop.is_set():
                break

            stepping = self._engine is not None and self._initialized and not self._engine.done
            if not stepping:
                time.sleep(0.001)
                next_step = time.monotonic()
                continue
            if cfg.pacing == "realtime":
                now = time.monotonic()
                if now < next_step:
                    time.sleep(min(next_step - now, 0.02))
                    continue
                next_step += self._episode_config.dt_env
            self._step_once()

    def _current_action(self) -> tuple[ActionCommand, int]:
        payload, seq, _ = self._action_register.get()
        if payload is None:
            return ActionCommand(0.0, 0.0, Gear.DRIVE), -1
        return (
            ActionCommand(payload.acceleration, payload.steering, Gear(payload.gear)),
            seq,
        )

    def _step_once(self) -> dict:
        action, action_seq = self._current_action()
        observation, reward, done, info = self._engine.step(action)
        info = dict(info)
        info["action_seq"] = action_seq
        self._last_info = info
        self._last_reward = reward
        self._state_register.set((observation, self._engine.state.vehicle))
        if self.config.pacing != "realtime":
            self._publish_for_sim_time()
        if done:
            self.episode_done.set()
        return {
            "sim_time": info["sim_time"],
            "reward": reward,
            "done": done,
            "info": info,
        }

    # -- command handling -----------------------------------------------------------

    def _handle_command(self, doc: dict, peer_host: str, reply_q: queue.Queue) -> None:
        cmd = doc.get("cmd")
        handler = getattr(self, f"_cmd_{cmd}", None)
        if handler is None:
            reply_q.put({"status": "error", "reason": "unknown_cmd"})
            return
        try:
            reply_q.put(handler(doc, peer_host))
        except Exception as exc:  # defensive: a command must never kill the loop
            reply_q.put({"status": "error", "reason": "internal", "detail": str(exc)})

    def _reset_engine(self, overrides: dict) -> None:
        config = _merge_episode_config(self._episode_config, overrides)
        engine = Engine(config)  # resolves and validates the track
        observation = engine.reset()
        # commit only after the new episode is fully constructed
        self._episode_config = config
        self._engine = engine
        self._initialized = True
        self.episode_done.clear()
        self._state_register.set((observation, self._engine.state.vehicle))
        self._sensor_published = 0
        self._camera_published = 0
        if self.config.pacing != "realtime":
            self._publish_sensor_once()
            self._publish_camera_once()

    def _cmd_reset(self, doc: dict, peer_host: str) -> dict:
        overrides = doc.get("config", {})
        try:
            self._reset_engine(overrides)
        except (TrackError, ValueError, TypeError) as exc:
            return {"status": "error", "reason": "bad_config", "detail": str(exc)}
        return {"status": "ok", "sim_time": 0.0, "track": self._episode_config.track}

    def _cmd_set_track(self, doc: dict, peer_host: str) -> dict:
        name = doc.get("name")
        if not isinstance(name, str):
            return {"status": "error", "reason": "bad_config", "detail": "missing name"}
        try:
            resolve_track(name)
        except TrackError as exc:
            return {"status": "error", "reason": "unknown_track", "detail": str(exc)}
        self._reset_engine({"track": name})
        return {"status": "ok", "track": name}

    def _cmd_set_pose(self, doc: dict, peer_host: str) -> dict:
        try:
            overrides = {
                "spawn_progress": float(doc["s"]),
                "spawn_offset": float(doc.get("d", 0.0)),
            }
        except (KeyError, TypeError, ValueError):
            return {"status": "error", "reason": "bad_config", "detail": "need numeric s"}
        self._reset_engine(overrides)
        return {"status": "ok", **overrides}

    def _cmd_set_mode(self, doc: dict, peer_host: str) -> dict:
        self._vision_only = bool(doc.get("vision_only", False))
        return {"status": "ok", "vision_only": self._vision_only}

    def _cmd_get_state(self, doc: dict, peer_host: str) -> dict:
        if not self._initialized or self._engine is None:
            return {
                "status": "ok",
                "initialized": False,
                "done": True,
                "termination_reason": "none-initialized",
                "vision_only": self._vision_only,
                "track": self._episode_config.track,
            }
        state = self._engine.state
        payload, _, _ = self._state_register.get()
        observation = payload[0] if payload else None
        return {
            "status": "ok",
            "initialized": True,
            "done": state.done,
            "termination_reason": state.termination_reason.value,
            "sim_time": state.sim_time,
            "vision_only": self._vision_only,
            "state": {
                "x": state.vehicle.x,
                "y": state.vehicle.y,
                "v": state.vehicle.v,
                "yaw": state.vehicle.yaw,
            },
            "progress_s": state.progress_s,
            "unwrapped_progress_m": state.unwrapped_progress,
            "laps_done": state.laps_done,
            "wheels_out": state.wheels_out,
            "obs": list(observation.multimodal) if observation is not None else None,
            "reward": self._last_reward,
            "seq": {
                "action": self._action_register.seq,
                "sensor": self._sensor_seq,
                "camera": self._camera_seq,
            },
            "dropped_datagrams": self._dropped_datagrams,
            "track": self._episode_config.track,
        }

    def _cmd_get_log(self, doc: dict, peer_host: str) -> dict:
        if not self._initialized or self._engine is None:
            return {"status": "error", "reason": "not_initialized"}
        return {"status": "ok", "log": self._engine.trajectory_log().to_json_dict()}

    def _cmd_subscribe_sensors(self, doc: dict, peer_host: str) -> dict:
        try:
            port = int(doc["port"])
        except (KeyError, TypeError, ValueError):
            return {"status": "error", "reason": "bad_config", "detail": "need port"}
        host = doc.get("host", peer_host)
        self._sensor_targets.add((str(host), port))
        return {"status": "ok", "target": [host, port]}

    def _cmd_step(self, doc: dict, peer_host: str) -> dict:
        if self.config.pacing != "lockstep":
            return {"status": "error", "reason": "not_lockstep"}
        if not self._initialized or self._engine is None:
            return {"status": "error", "reason": "not_initialized"}
        if self._engine.done:
            return {"status": "error", "reason": "episode_finished"}
        await_seq = doc.get("await_seq")
        if await_seq is not None:
            deadline = time.monotonic() + float(doc.get("timeout", 5.0))
            while self._action_register.seq < int(await_seq):
                if time.monotonic() > deadline:
                    return {"status": "error", "reason": "action_timeout"}
                time.sleep(0.0002)
        count = int(doc.get("n", 1))
        result: dict = {}
        for _ in range(max(1, count)):
            result = self._step_once()
            if result["done"]:
                break
        return {"status": "ok", **result}

    def _cmd_shutdown(self, doc: dict, peer_host: str) -> dict:
        self._stop.set()
        return {"status": "ok"}
