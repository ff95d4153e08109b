"""Small planar-geometry helpers shared across modules."""

from __future__ import annotations

import math

import numpy as np

TAU = 2.0 * math.pi


def wrap_to_pi(angle: float) -> float:
    """Wrap an angle to the interval (-pi, pi]."""
    wrapped = math.remainder(angle, TAU)
    if wrapped <= -math.pi:
        wrapped += TAU
    return wrapped


def unwrap_near(angle: float, reference: float) -> float:
    """Return the representative of ``angle`` (mod 2*pi) nearest ``reference``."""
    return reference + wrap_to_pi(angle - reference)


def polyline_arclength(points: np.ndarray) -> np.ndarray:
    """Cumulative arc length at each vertex of an (N, 2) polyline."""
    diffs = np.diff(points, axis=0)
    cum = np.zeros(points.shape[0])
    np.cumsum(np.hypot(diffs[:, 0], diffs[:, 1]), out=cum[1:])
    return cum


def resample_by_arclength(
    points: np.ndarray, spacing: float, closed: bool = False
) -> tuple[np.ndarray, float]:
    """Resample a polyline at (near-)uniform arc-length spacing.

    For closed polylines the implicit last->first segment is included and
    the first point is not repeated; the returned spacing divides the
    total length exactly. Returns (resampled_points, actual_spacing).
    """
    pts = np.asarray(points, dtype=np.float64)
    if closed:
        pts = np.vstack([pts, pts[:1]])
    cum = polyline_arclength(pts)
    total = float(cum[-1])
    if total <= 0.0:
        raise ValueError("polyline has zero length")
    n_seg = max(2, int(round(total / spacing)))
    h = total / n_seg
    if closed:
        s = np.arange(n_seg) * h
    else:
        s = np.linspace(0.0, total, n_seg + 1)
    out = np.empty((s.shape[0], 2))
    out[:, 0] = np.interp(s, cum, pts[:, 0])
    out[:, 1] = np.interp(s, cum, pts[:, 1])
    return out, h


def central_curvature(points: np.ndarray, h: float, closed: bool = False) -> np.ndarray:
    """Signed curvature of uniformly spaced samples by central differences.

    Uses first/second central differences of the coordinates; samples
    whose parameterization speed is below 1e-9 yield NaN (degenerate).
    For open polylines only interior samples are returned.
    """
    pts = np.asarray(points, dtype=np.float64)
    if closed:
        nxt = np.roll(pts, -1, axis=0)
        prv = np.roll(pts, 1, axis=0)
        cur = pts
    else:
        nxt = pts[2:]
        prv = pts[:-2]
        cur = pts[1:-1]
    d1 = (nxt - prv) / (2.0 * h)
    d2 = (nxt - 2.0 * cur + prv) / (h * h)
    speed_sq = d1[:, 0] ** 2 + d1[:, 1] ** 2
    numer = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    with np.errstate(divide="ignore", invalid="ignore"):
        kappa = numer / np.power(speed_sq, 1.5)
    kappa[speed_sq < 1e-18] = np.nan
    return kappa


def segments_properly_intersect(
    p1: np.ndarray, p2: np.ndarray, q1: np.ndarray, q2: np.ndarray
) -> np.ndarray:
    """Vectorized proper-crossing test of segment (p1, p2) against segments (q1, q2)."""

    def cross(o, a, b):
        return (a[..., 0] - o[..., 0]) * (b[..., 1] - o[..., 1]) - (
            a[..., 1] - o[..., 1]
        ) * (b[..., 0] - o[..., 0])

    d1 = cross(q1, q2, p1)
    d2 = cross(q1, q2, p2)
    d3 = cross(p1, p2, q1)
    d4 = cross(p1, p2, q2)
    return ((d1 > 0) != (d2 > 0)) & ((d3 > 0) != (d4 > 0))
