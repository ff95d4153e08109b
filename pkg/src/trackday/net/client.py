"""Scripted protocol client for tests, tooling, and remote evaluation.

This is deliberately minimal: it speaks the normative wire formats and
the control channel, and in lockstep mode drives the server one step per
``step()`` call. Full agent-facing SDKs live outside this package and
talk to the same surfaces.
"""

from __future__ import annotations

import json
import socket
from typing import Optional

from . import wire


class ControlError(RuntimeError):
    """The server answered a control command with an error status."""

    def __init__(self, reply: dict):
        self.reply = reply
        super().__init__(f"control error: {reply.get('reason')} {reply.get('detail', '')}")


class ProtocolClient:
    """Control + action + sensor + optional camera connection to a server."""

    def __init__(
        self,
        host: str,
        control_port: int,
        action_port: int,
        camera_port: Optional[int] = None,
        subscribe_sensors: bool = True,
        timeout: float = 10.0,
    ):
        self.host = host
        self._control = socket.create_connection((host, control_port), timeout=timeout)
        self._control_file = self._control.makefile("rwb")
        self._action_addr = (host, action_port)
        self._action_sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        self._action_seq = 0

        self._sensor_sock: Optional[socket.socket] = None
        if subscribe_sensors:
            self._sensor_sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
            self._sensor_sock.bind((host, 0))
            self._sensor_sock.settimeout(timeout)
            port = self._sensor_sock.getsockname()[1]
            self.control({"cmd": "subscribe_sensors", "port": port})

        self._camera_sock: Optional[socket.socket] = None
        self._camera_buffer = b""
        if camera_port is not None:
            self._camera_sock = socket.create_connection((host, camera_port), timeout=timeout)

    # -- control channel ----------------------------------------------------

    def control(self, doc: dict) -> dict:
        self._control_file.write((json.dumps(doc) + "\n").encode("utf-8"))
        self._control_file.flush()
        line = self._control_file.readline()
        if not line:
            raise ConnectionError("control connection closed by server")
        reply = json.loads(line)
        if reply.get("status") != "ok":
            raise ControlError(reply)
        return reply

    def reset(self, config: Optional[dict] = None) -> dict:
        doc: dict = {"cmd": "reset"}
        if config:
            doc["config"] = config
        return self.control(doc)

    def get_state(self) -> dict:
        return self.control({"cmd": "get_state"})

    def get_log(self) -> dict:
        return self.control({"cmd": "get_log"})["log"]

    def shutdown(self) -> None:
        self.control({"cmd": "shutdown"})

    # -- action / stepping -----------------------------------------------------

    def send_action(self, acceleration: float, steering: float, gear: int = 1) -> int:
        self._action_seq += 1
        message = wire.ActionMessage(
            seq=self._action_seq, steering=steering, acceleration=acceleration, gear=gear
        )
        self._action_sock.sendto(wire.encode_action(message), self._action_addr)
        return self._action_seq

    def step(self, acceleration: float, steering: float, n: int = 1) -> dict:
        """Lockstep: send the action datagram, then request the step(s)."""
        seq = self.send_action(acceleration, steering)
        return self.control({"cmd": "step", "n": n, "await_seq": seq})

    # -- sensor / camera consumption -----------------------------------------------

    def recv_sensor(self) -> wire.SensorMessage:
        if self._sensor_sock is None:
            raise RuntimeError("sensor subscription disabled")
        data, _ = self._sensor_sock.recvfrom(4096)
        return wire.decode_sensor(data)

    def drain_sensors(self) -> list[wire.SensorMessage]:
        """All queued sensor datagrams without blocking."""
        if self._sensor_sock is None:
            return []
        out = []
        self._sensor_sock.setblocking(False)
        try:
            while True:
                try:
                    data, _ = self._sensor_sock.recvfrom(4096)
                except BlockingIOError:
                    break
                out.append(wire.decode_sensor(data))
        finally:
            self._sensor_sock.settimeout(10.0)
        return out

    def recv_camera_frame(self) -> wire.CameraFrame:
        if self._camera_sock is None:
            raise RuntimeError("camera connection not opened")
        length_prefix = self._read_camera_bytes(4)
        length = int.from_bytes(length_prefix, "little")
        payload = self._read_camera_bytes(length)
        return wire.decode_camera_payload(payload)

    def _read_camera_bytes(self, count: int) -> bytes:
        while len(self._camera_buffer) < count:
            chunk = self._camera_sock.recv(65536)
            if not chunk:
                raise ConnectionError("camera connection closed by server")
            self._camera_buffer += chunk
        data = self._camera_buffer[:count]
        self._camera_buffer = self._camera_buffer[count:]
        return data

    def close(self) -> None:
        for sock in (self._action_sock, self._sensor_sock, self._camera_sock):
            if sock is not None:
                try:
                    sock.close()
                except OSError:
                    pass
        try:
            self._control_file.close()
            self._control.close()
        except OSError:
            pass

    def __enter__(self) -> "ProtocolClient":
        return self

    def __exit__(self, *exc) -> None:
        self.close()
