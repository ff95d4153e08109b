"""Socket server, wire formats, and the scripted test client."""

from .registers import LatestValueRegister
from .server import ServerConfig, SimServer
from .wire import (
    ActionMessage,
    CameraFrame,
    SensorMessage,
    WireError,
    decode_action,
    decode_camera_payload,
    decode_sensor,
    encode_action,
    encode_camera_frame,
    encode_sensor,
)

__all__ = [
    "ActionMessage",
    "CameraFrame",
    "LatestValueRegister",
    "SensorMessage",
    "ServerConfig",
    "SimServer",
    "WireError",
    "decode_action",
    "decode_camera_payload",
    "decode_sensor",
    "encode_action",
    "encode_camera_frame",
    "encode_sensor",
]
