"""Binary wire formats (normative, little-endian; see protocol.md).

Action datagram, 29 bytes:
    offset 0   magic      4s   "L2RA"
    offset 4   seq        u32
    offset 8   reserved   u32  always 0 on encode, ignored on decode
    offset 12  steering   f64
    offset 20  accel      f64
    offset 28  gear       u8   0=park 1=drive 2=neutral 3=reverse

Sensor datagram, 256 bytes:
    offset 0   magic      4s   "L2RS"
    offset 4   seq        u32
    offset 8   sim_time   f64
    offset 16  values     30 x f64 in the observation-vector slot order
    (yaw, slot 12, sits at byte offset 4 + 4 + 8 + 12*8 = 112)

Camera frame (TCP stream): u32 payload length, then the payload:
    u32 seq | f64 sim_time | u16 width | u16 height | u8 channels | pixels
The length prefix covers everything after itself; pixels are row-major
uint8, channels fastest.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

ACTION_MAGIC = b"L2RA"
SENSOR_MAGIC = b"L2RS"

_ACTION_STRUCT = struct.Struct("<4sIIddB")
_SENSOR_STRUCT = struct.Struct("<4sId30d")
_CAMERA_HEADER_STRUCT = struct.Struct("<IdHHB")
_LENGTH_PREFIX = struct.Struct("<I")

ACTION_DATAGRAM_SIZE = _ACTION_STRUCT.size  # 29
SENSOR_DATAGRAM_SIZE = _SENSOR_STRUCT.size  # 256
SENSOR_VALUE_COUNT = 30


class WireError(ValueError):
    """Malformed datagram or frame; carries a short machine-usable reason."""

    def __init__(self, reason: str, detail: str = ""):
        self.reason = reason
        super().__init__(f"{reason}: {detail}" if detail else reason)


@dataclass(frozen=True)
class ActionMessage:
    seq: int
    steering: float
    acceleration: float
    gear: int = 1  # drive

    def __post_init__(self) -> None:
        if not 0 <= self.gear <= 3:
            raise WireError("bad_gear", f"gear {self.gear} not in 0..3")
        if not 0 <= self.seq <= 0xFFFFFFFF:
            raise WireError("bad_seq", f"seq {self.seq} does not fit u32")


@dataclass(frozen=True)
class SensorMessage:
    seq: int
    sim_time: float
    values: tuple  # 30 floats, observation-vector slot order

    def __post_init__(self) -> None:
        if len(self.values) != SENSOR_VALUE_COUNT:
            raise WireError("bad_values", f"expected {SENSOR_VALUE_COUNT} values")
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))


@dataclass(frozen=True)
class CameraFrame:
    seq: int
    sim_time: float
    width: int
    height: int
    channels: int
    pixels: bytes

    def __post_init__(self) -> None:
        expected = self.width * self.height * self.channels
        if len(self.pixels) != expected:
            raise WireError(
                "bad_pixels",
                f"{len(self.pixels)} bytes for {self.width}x{self.height}x{self.channels}",
            )


def encode_action(message: ActionMessage) -> bytes:
    return _ACTION_STRUCT.pack(
        ACTION_MAGIC, message.seq, 0, message.steering, message.acceleration, message.gear
    )


def decode_action(data: bytes) -> ActionMessage:
    if len(data) != ACTION_DATAGRAM_SIZE:
        raise WireError("bad_length", f"{len(data)} != {ACTION_DATAGRAM_SIZE}")
    magic, seq, _reserved, steering, acceleration, gear = _ACTION_STRUCT.unpack(data)
    if magic != ACTION_MAGIC:
        raise WireError("bad_magic", repr(magic))
    if gear > 3:
        raise WireError("bad_gear", str(gear))
    return ActionMessage(seq=seq, steering=steering, acceleration=acceleration, gear=gear)


def encode_sensor(message: SensorMessage) -> bytes:
    return _SENSOR_STRUCT.pack(SENSOR_MAGIC, message.seq, message.sim_time, *message.values)


def decode_sensor(data: bytes) -> SensorMessage:
    if len(data) != SENSOR_DATAGRAM_SIZE:
        raise WireError("bad_length", f"{len(data)} != {SENSOR_DATAGRAM_SIZE}")
    fields = _SENSOR_STRUCT.unpack(data)
    if fields[0] != SENSOR_MAGIC:
        raise WireError("bad_magic", repr(fields[0]))
    return SensorMessage(seq=fields[1], sim_time=fields[2], values=fields[3:])


def encode_camera_frame(frame: CameraFrame) -> bytes:
    payload = (
        _CAMERA_HEADER_STRUCT.pack(
            frame.seq, frame.sim_time, frame.width, frame.height, frame.channels
        )
        + frame.pixels
    )
    return _LENGTH_PREFIX.pack(len(payload)) + payload


def decode_camera_payload(payload: bytes) -> CameraFrame:
    header = _CAMERA_HEADER_STRUCT.size
    if len(payload) < header:
        raise WireError("bad_length", f"payload {len(payload)} shorter than header {header}")
    seq, sim_time, width, height, channels = _CAMERA_HEADER_STRUCT.unpack(payload[:header])
    pixels = payload[header:]
    if len(pixels) != width * height * channels:
        raise WireError(
            "bad_length", f"{len(pixels)} pixel bytes for {width}x{height}x{channels}"
        )
    return CameraFrame(
        seq=seq, sim_time=sim_time, width=width, height=height,
        channels=channels, pixels=pixels,
    )
