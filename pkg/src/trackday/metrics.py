"""Driving-quality metrics computed from a trajectory log.

Seven metrics are reported:

* ECP  - episode completion percentage of the required laps
* ED   - seconds to the first attainment of the furthest progress
* AATS - average speed in km/h over [0, ED]
* ADE  - mean absolute centerline offset over [0, ED]
* TrA  - admissibility 1 - sqrt(t_unsafe / t_episode), where unsafe
         means exactly one wheel outside the drivable area
* TrE  - ratio of track RMS curvature to driven-path RMS curvature over
         the covered span (> 1 means the path is straighter than the track)
* MS   - negated log dimensionless jerk of the speed profile

Averaging windows end at ED so a stalled tail does not dilute the speed
and displacement statistics. Metrics that are undefined for a log (too
short, degenerate curvature, zero peak speed) are NaN and serialize as
null, with a note in the report flags.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .geometry import central_curvature, polyline_arclength, resample_by_arclength
from .logs import TrajectoryLog
from .track import TrackIndex

JERK_INTEGRAL_FLOOR = 1e-12
CURVATURE_EPS = 1e-9
DEFAULT_CURVATURE_SPACING = 1.0  # m


@dataclass
class MetricsReport:
    """The seven task metrics plus qualifying flags."""

    ecp: float
    ed: float
    aats: float
    ade: float
    tra: float
    tre: float
    ms: float
    flags: list[str] = field(default_factory=list)

    _JSON_KEYS = (
        ("ECP", "ecp"),
        ("ED", "ed"),
        ("AATS", "aats"),
        ("ADE", "ade"),
        ("TrA", "tra"),
        ("TrE", "tre"),
        ("MS", "ms"),
    )

    def to_json_dict(self) -> dict:
        doc = {}
        for key, attr in self._JSON_KEYS:
            value = getattr(self, attr)
            doc[key] = value if math.isfinite(value) else None
        doc["flags"] = list(self.flags)
        return doc

    @classmethod
    def from_json_dict(cls, doc: dict) -> "MetricsReport":
        values = {
            attr: (float(doc[key]) if doc.get(key) is not None else math.nan)
            for key, attr in cls._JSON_KEYS
        }
        return cls(flags=list(doc.get("flags", [])), **values)

    def save(self, path: Union[str, Path]) -> None:
        Path(path).write_text(json.dumps(self.to_json_dict(), indent=2), encoding="utf-8")


def _ed_index(log: TrajectoryLog) -> int:
    """Index of the first sample attaining the maximum unwrapped progress."""
    return int(np.argmax(log.progress == np.max(log.progress)))


def ecp(log: TrajectoryLog, track: TrackIndex, laps_required: Optional[int] = None) -> float:
    """Percentage of the required-laps episode completed, in [0, 100]."""
    log.validate()
    laps = laps_required if laps_required is not None else int(log.meta["laps_required"])
    frac = float(np.max(log.progress)) / (laps * track.total_length)
    return float(np.clip(100.0 * frac, 0.0, 100.0))


def ed(log: TrajectoryLog) -> float:
    """Time of first attainment of the furthest progress, in seconds."""
    log.validate()
    return float(log.sim_time[_ed_index(log)])


def aats(log: TrajectoryLog) -> float:
    """Mean speed over [0, ED] converted to km/h."""
    log.validate()
    end = _ed_index(log)
    return 3.6 * float(np.mean(log.v[: end + 1]))


def ade(log: TrajectoryLog) -> float:
    """Mean absolute lateral displacement from the centerline over [0, ED]."""
    log.validate()
    end = _ed_index(log)
    return float(np.mean(np.abs(log.lateral[: end + 1])))


def tra(log: TrajectoryLog) -> float:
    """Admissibility 1 - sqrt(t_unsafe / t_episode).

    Unsafe time accumulates dt for every post-reset sample with exactly
    one wheel outside the drivable area.
    """
    log.validate()
    t_episode = float(log.sim_time[-1] - log.sim_time[0])
    t_unsafe = log.dt * int(np.count_nonzero(log.wheels_out[1:] == 1))
    return 1.0 - math.sqrt(t_unsafe / t_episode)


def path_curvature_rms(points: np.ndarray, spacing: float) -> float:
    """RMS curvature of a path after uniform arc-length resampling.

    Central differences on the resampled points; samples with a
    degenerate parameterization speed are skipped. Requires a path at
    least four spacings long.
    """
    pts = np.asarray(points, dtype=np.float64)
    length = float(polyline_arclength(pts)[-1])
    if length < 4.0 * spacing:
        raise ValueError(
            f"path length {length:.3f} m is shorter than 4 spacings ({4 * spacing:.3f} m)"
        )
    resampled, h = resample_by_arclength(pts, spacing, closed=False)
    kappa = central_curvature(resampled, h, closed=False)
    kappa = kappa[np.isfinite(kappa)]
    if kappa.size == 0:
        return math.nan
    return float(np.sqrt(np.mean(kappa**2)))


def tre(
    log: TrajectoryLog,
    track: TrackIndex,
    spacing: float = DEFAULT_CURVATURE_SPACING,
) -> float:
    """Ratio of track RMS curvature to driven-path RMS curvature.

    The track side is evaluated over the same arc-length span the agent
    covered (one full lap once the span exceeds the track length). NaN
    when the driven path is too short or has near-zero curvature.
    """
    log.validate()
    end = _ed_index(log)
    positions = log.positions()[: end + 1]
    try:
        path_rms = path_curvature_rms(positions, spacing)
    except ValueError:
        return math.nan
    if not math.isfinite(path_rms) or path_rms < CURVATURE_EPS:
        return math.nan

    origin = float(log.meta.get("spawn_s", track.project(positions[0]).s))
    span = float(log.progress[end] - np.min(log.progress[: end + 1]))
    lo = origin + float(np.min(log.progress[: end + 1]))
    if span >= track.total_length and track.closed:
        track_rms = track.curvature_rms(spacing)
    else:
        n = max(int(math.ceil(span / spacing)), 4) + 1
        s_values = lo + np.linspace(0.0, span, n)
        pts = np.array([track.sample_centerline(s)[0] for s in s_values])
        try:
            track_rms = path_curvature_rms(pts, spacing)
        except ValueError:
            return math.nan
    return float(track_rms / path_rms)


def ms(log: TrajectoryLog) -> float:
    """Movement smoothness: negated log dimensionless jerk of speed.

    Uses the window [0, ED]; the squared-jerk integral is floored at
    1e-12 so perfectly smooth profiles saturate instead of diverging.
    NaN when the window has fewer than 5 samples or zero peak speed.
    """
    log.validate()
    end = _ed_index(log)
    speed = log.v[: end + 1]
    if speed.shape[0] < 5:
        return math.nan
    dt = log.dt
    duration = float(log.sim_time[end] - log.sim_time[0])
    v_peak = float(np.max(speed))
    if v_peak <= 0.0:
        return math.nan
    jerk = (speed[2:] - 2.0 * speed[1:-1] + speed[:-2]) / (dt * dt)
    jerk_sq = jerk**2
    # replicate edge values so the trapezoid spans the whole window
    padded = np.concatenate([jerk_sq[:1], jerk_sq, jerk_sq[-1:]])
    integral = float(np.trapezoid(padded, dx=dt))
    integral = max(integral, JERK_INTEGRAL_FLOOR)
    eta_ldj = math.log(duration**3 / v_peak**2 * integral)
    return -eta_ldj


def compute_report(log: TrajectoryLog, track: TrackIndex) -> MetricsReport:
    """All seven metrics plus qualifying flags for a finished episode."""
    report = MetricsReport(
        ecp=ecp(log, track),
        ed=ed(log),
        aats=aats(log),
        ade=ade(log),
        tra=tra(log),
        tre=tre(log, track),
        ms=ms(log),
    )
    if report.ecp < 100.0:
        report.flags.append("incomplete_episode")
        report.flags.append("tre_partial_span")
    for name in ("tre", "ms"):
        if not math.isfinite(getattr(report, name)):
            report.flags.append(f"{name}_undefined")
    return report
