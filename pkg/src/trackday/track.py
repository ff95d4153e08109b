"""Racetrack representation: centerline polylines with drivable half-widths.

A :class:`TrackSpec` is the validated on-disk description (JSON schema
below); a :class:`TrackIndex` adds the derived tables needed for fast
queries: arc-length parameterization, per-segment tangents, per-vertex
headings, and a uniformly resampled curvature table.

Track JSON schema (all distances in meters, ENU ground plane)::

    {
      "name": "oval",
      "closed": true,
      "centerline": [[east, north], ...],
      "half_width_left": 5.0 | [5.0, ...],
      "half_width_right": 5.0 | [5.0, ...]
    }

Closed tracks must not repeat the first point as the last one; the
closing segment is implicit (a repeated endpoint is dropped on load).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import IO, NamedTuple, Union

import numpy as np

from . import kernels
from .geometry import (
    central_curvature,
    polyline_arclength,
    resample_by_arclength,
    segments_properly_intersect,
)

MIN_POINT_SEPARATION = 1e-6
MIN_CENTERLINE_POINTS = 8


class TrackError(ValueError):
    """Raised for malformed or geometrically invalid track descriptions."""


def _as_width_array(value, n_points: int, name: str) -> np.ndarray:
    if isinstance(value, (int, float)):
        widths = np.full(n_points, float(value))
    else:
        widths = np.asarray(value, dtype=np.float64)
        if widths.ndim != 1 or widths.shape[0] != n_points:
            raise TrackError(
                f"{name} must be a scalar or a list with one entry per "
                f"centerline point ({n_points}), got length {widths.shape[0]}"
            )
    if not np.all(np.isfinite(widths)):
        raise TrackError(f"{name} contains non-finite values")
    bad = np.flatnonzero(widths <= 0.0)
    if bad.size:
        raise TrackError(f"{name}[{bad[0]}] must be > 0, got {widths[bad[0]]}")
    return widths


@dataclass(frozen=True)
class TrackSpec:
    """Validated centerline polyline with drivable half-widths."""

    name: str
    centerline: np.ndarray
    half_width_left: np.ndarray
    half_width_right: np.ndarray
    closed: bool = True

    def __post_init__(self) -> None:
        pts = np.asarray(self.centerline, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise TrackError("centerline must be an (N, 2) array of [east, north] points")
        if not np.all(np.isfinite(pts)):
            raise TrackError("centerline contains non-finite coordinates")
        if self.closed and pts.shape[0] >= 2:
            if np.hypot(*(pts[-1] - pts[0])) <= MIN_POINT_SEPARATION:
                pts = pts[:-1]  # implicit closing segment; drop repeated endpoint
        if pts.shape[0] < MIN_CENTERLINE_POINTS:
            raise TrackError(
                f"centerline has {pts.shape[0]} points; at least "
                f"{MIN_CENTERLINE_POINTS} required"
            )
        seps = np.hypot(*np.diff(pts, axis=0).T)
        bad = np.flatnonzero(seps <= MIN_POINT_SEPARATION)
        if bad.size:
            raise TrackError(
                f"centerline points {bad[0]} and {bad[0] + 1} are closer than "
                f"{MIN_POINT_SEPARATION} m"
            )
        object.__setattr__(self, "centerline", pts)
        object.__setattr__(
            self,
            "half_width_left",
            _as_width_array(self.half_width_left, pts.shape[0], "half_width_left"),
        )
        object.__setattr__(
            self,
            "half_width_right",
            _as_width_array(self.half_width_right, pts.shape[0], "half_width_right"),
        )
        self._check_self_intersection()
        for arr in (self.centerline, self.half_width_left, self.half_width_right):
            arr.flags.writeable = False

    def _segments(self) -> tuple[np.ndarray, np.ndarray]:
        pts = self.centerline
        if self.closed:
            return pts, np.roll(pts, -1, axis=0)
        return pts[:-1], pts[1:]

    def _check_self_intersection(self) -> None:
        starts, ends = self._segments()
        n = starts.shape[0]
        idx = np.arange(n)
        for i in range(n - 1):
            js = idx[i + 1 :]
            # skip segments sharing a vertex with segment i
            mask = js != i + 1
            if self.closed and i == 0:
                mask &= js != n - 1
            js = js[mask]
            if js.size == 0:
                continue
            hits = segments_properly_intersect(starts[i], ends[i], starts[js], ends[js])
            if np.any(hits):
                j = int(js[np.argmax(hits)])
                raise TrackError(f"centerline self-intersects (segments {i} and {j})")

    def to_json_dict(self) -> dict:
        """Plain-JSON representation matching the track file schema."""

        def width_field(widths: np.ndarray):
            if np.all(widths == widths[0]):
                return float(widths[0])
            return [float(w) for w in widths]

        return {
            "name": self.name,
            "closed": self.closed,
            "centerline": [[float(e), float(n)] for e, n in self.centerline],
            "half_width_left": width_field(self.half_width_left),
            "half_width_right": width_field(self.half_width_right),
        }


TrackSource = Union[str, Path, bytes, IO[bytes], IO[str]]


def load_track(source: TrackSource) -> TrackSpec:
    """Load and validate a track from a JSON document, path, or stream."""
    if isinstance(source, (str, Path)):
        path = Path(source)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise TrackError(f"cannot read track file {path}: {exc}") from exc
    elif isinstance(source, bytes):
        text = source.decode("utf-8")
    else:
        data = source.read()
        text = data.decode("utf-8") if isinstance(data, bytes) else data
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise TrackError(f"invalid JSON in track document: {exc}") from exc
    if not isinstance(doc, dict):
        raise TrackError("track document must be a JSON object")
    for key in ("name", "centerline", "half_width_left", "half_width_right"):
        if key not in doc:
            raise TrackError(f"track document missing field '{key}'")
    return TrackSpec(
        name=str(doc["name"]),
        centerline=np.asarray(doc["centerline"], dtype=np.float64),
        half_width_left=doc["half_width_left"],
        half_width_right=doc["half_width_right"],
        closed=bool(doc.get("closed", True)),
    )


def save_track(spec: TrackSpec, path: Union[str, Path]) -> None:
    """Write a track to the JSON file format."""
    Path(path).write_text(json.dumps(spec.to_json_dict()), encoding="utf-8")


class Projection(NamedTuple):
    """Result of projecting a point onto the centerline."""

    s: float  # arc-length progress along the centerline, in [0, total)
    d: float  # signed lateral offset, positive to the left of travel
    heading: float  # tangent heading of the nearest segment, rad
    segment: int  # index of the nearest segment
    t: float  # parameter in [0, 1] along that segment


class TrackIndex:
    """Immutable arc-length index over a :class:`TrackSpec`.

    Provides projection, interpolation, containment, and curvature
    queries; safe to share across threads after construction.
    """

    def __init__(self, spec: TrackSpec, curvature_spacing: float = 1.0):
        self.spec = spec
        pts = spec.centerline
        n = pts.shape[0]
        starts, ends = spec._segments()
        deltas = ends - starts
        seg_len = np.hypot(deltas[:, 0], deltas[:, 1])

        self.closed = spec.closed
        self.n_vertices = n
        self.cum_vertex = polyline_arclength(pts)
        self.total_length = float(self.cum_vertex[-1] + (seg_len[-1] if spec.closed else 0.0))
        if self.total_length <= 0.0:
            raise TrackError("track has zero total length")

        self._seg_ax = np.ascontiguousarray(starts[:, 0])
        self._seg_ay = np.ascontiguousarray(starts[:, 1])
        self._seg_dx = np.ascontiguousarray(deltas[:, 0])
        self._seg_dy = np.ascontiguousarray(deltas[:, 1])
        self._seg_len = np.ascontiguousarray(seg_len)
        self._seg_len2 = np.ascontiguousarray(seg_len**2)
        self._seg_cum = np.ascontiguousarray(self.cum_vertex[: seg_len.shape[0]])
        self._seg_heading = np.unwrap(np.arctan2(deltas[:, 1], deltas[:, 0]))

        # per-vertex heading: outgoing segment (incoming for an open end), unwrapped
        if spec.closed:
            self.vertex_heading = self._seg_heading.copy()
        else:
            self.vertex_heading = np.append(self._seg_heading, self._seg_heading[-1])

        # interpolation tables over [0, total_length]
        if spec.closed:
            self._interp_s = np.append(self.cum_vertex, self.total_length)
            self._interp_pts = np.vstack([pts, pts[:1]])
            self._interp_wl = np.append(spec.half_width_left, spec.half_width_left[:1])
            self._interp_wr = np.append(spec.half_width_right, spec.half_width_right[:1])
        else:
            self._interp_s = self.cum_vertex
            self._interp_pts = pts
            self._interp_wl = spec.half_width_left
            self._interp_wr = spec.half_width_right

        self.curvature_spacing = float(curvature_spacing)
        samples, h = resample_by_arclength(pts, curvature_spacing, closed=spec.closed)
        kappa = central_curvature(samples, h, closed=spec.closed)
        if spec.closed:
            # wrap the table so interpolation covers [0, total_length]
            self._kappa_s = np.append(np.arange(samples.shape[0]) * h, self.total_length)
            self._kappa = np.append(kappa, kappa[:1])
        else:
            # endpoints have no central difference; replicate the neighbors
            self._kappa_s = np.linspace(0.0, self.total_length, samples.shape[0])
            self._kappa = np.concatenate([kappa[:1], kappa, kappa[-1:]])
        self._kappa_h = h
        for arr in (self._kappa_s, self._kappa):
            arr.flags.writeable = False

    def _wrap_s(self, s: float) -> float:
        if self.closed:
            return float(s % self.total_length)
        return float(min(max(s, 0.0), self.total_length))

    def project(self, point) -> Projection:
        """Project a point onto the centerline (global nearest segment)."""
        px, py = float(point[0]), float(point[1])
        s, d, i, t = kernels.project_polyline(
            self._seg_ax,
            self._seg_ay,
            self._seg_dx,
            self._seg_dy,
            self._seg_len2,
            self._seg_len,
            self._seg_cum,
            px,
            py,
        )
        s = self._wrap_s(s)
        return Projection(s, float(d), float(self._seg_heading[int(i)]), int(i), float(t))

    def sample_centerline(self, s: float) -> tuple[np.ndarray, float, float]:
        """Point, tangent heading, and curvature at arc-length position ``s``.

        ``s`` wraps modulo the total length on closed tracks and clamps to
        the endpoints on open ones.
        """
        sw = self._wrap_s(s)
        point = np.array(
            [
                np.interp(sw, self._interp_s, self._interp_pts[:, 0]),
                np.interp(sw, self._interp_s, self._interp_pts[:, 1]),
            ]
        )
        seg = int(np.searchsorted(self._seg_cum, sw, side="right") - 1)
        seg = min(max(seg, 0), self._seg_heading.shape[0] - 1)
        return point, float(self._seg_heading[seg]), self.curvature_at(sw)

    def curvature_at(self, s: float) -> float:
        """Signed centerline curvature at ``s`` from the resampled table."""
        sw = self._wrap_s(s)
        return float(np.interp(sw, self._kappa_s, self._kappa))

    def half_widths_at(self, s: float) -> tuple[float, float]:
        """(left, right) drivable half-widths at arc-length position ``s``."""
        sw = self._wrap_s(s)
        wl = float(np.interp(sw, self._interp_s, self._interp_wl))
        wr = float(np.interp(sw, self._interp_s, self._interp_wr))
        return wl, wr

    def is_inside_drivable(self, point) -> bool:
        """Boundary-inclusive containment test against the half-widths."""
        proj = self.project(point)
        wl, wr = self.half_widths_at(proj.s)
        return -wr <= proj.d <= wl

    def curvature_rms(self, spacing: float = 1.0) -> float:
        """Root-mean-square centerline curvature at uniform resampling."""
        if not 0.0 < spacing < self.total_length / 16.0:
            raise TrackError(
                f"curvature spacing must be in (0, {self.total_length / 16.0:.3f}), "
                f"got {spacing}"
            )
        samples, h = resample_by_arclength(
            self.spec.centerline, spacing, closed=self.closed
        )
        kappa = central_curvature(samples, h, closed=self.closed)
        kappa = kappa[np.isfinite(kappa)]
        return float(np.sqrt(np.mean(kappa**2)))
