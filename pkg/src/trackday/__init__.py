"""Desk-scale autonomous racing environment.

A kinematic-bicycle racing simulator with real-track-style geometry, an
episodic engine behind a multi-rate socket protocol, a seven-metric
driving-quality suite, MPC (iLQR) and random baseline agents, dataset
recording/replay, and an evaluation harness.
"""

__version__ = "0.1.0"

from .dynamics import ActionCommand, Gear, VehicleParams, VehicleState
from .engine import Engine, EpisodeConfig, Observation, SimState, TerminationReason
from .kernels import BACKEND as KERNEL_BACKEND
from .library import bundled_track_names, load_bundled_track, resolve_track
from .logs import TrajectoryLog
from .metrics import MetricsReport, compute_report
from .track import TrackIndex, TrackSpec, load_track, save_track

__all__ = [
    "ActionCommand",
    "Engine",
    "EpisodeConfig",
    "Gear",
    "KERNEL_BACKEND",
    "MetricsReport",
    "Observation",
    "SimState",
    "TerminationReason",
    "TrackIndex",
    "TrackSpec",
    "TrajectoryLog",
    "VehicleParams",
    "VehicleState",
    "bundled_track_names",
    "compute_report",
    "load_bundled_track",
    "load_track",
    "resolve_track",
    "save_track",
]
