"""Deterministic top-down pseudo-camera.

The photoreal view is replaced by an ego-centered, heading-up occupancy
raster: drivable area white (255), off-track black (0), centerline
stripe mid-gray (128), and wheel markers (64). The track is rasterized
once into a world-aligned grid at twice the display resolution; each
frame then nearest-neighbor samples that grid, so rendering is cheap and
bit-deterministic given the vehicle state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import VehicleParams, VehicleState
from .geometry import resample_by_arclength
from .track import TrackIndex

DRIVABLE = 255
OFF_TRACK = 0
CENTERLINE = 128
EGO_MARKER = 64


@dataclass(frozen=True)
class CameraConfig:
    """Pseudo-camera window geometry."""

    enabled: bool = False
    width: int = 192
    height: int = 192
    channels: int = 3
    window_m: float = 60.0  # side length of the square ground window

    def __post_init__(self) -> None:
        if self.width < 8 or self.height < 8:
            raise ValueError("camera size must be at least 8x8")
        if self.channels not in (1, 3):
            raise ValueError("channels must be 1 or 3")
        if self.window_m <= 0.0:
            raise ValueError("window_m must be > 0")


class Camera:
    """Renders heading-up occupancy views of a track."""

    GRID_OVERSAMPLE = 2  # grid cells per display pixel (linear)

    def __init__(
        self,
        index: TrackIndex,
        config: CameraConfig = CameraConfig(),
        vehicle: VehicleParams = VehicleParams(),
    ):
        self.index = index
        self.config = config
        self.vehicle = vehicle
        self._display_res = config.window_m / config.width
        self._grid_res = self._display_res / self.GRID_OVERSAMPLE
        self._build_grid()
        self._build_sampling_offsets()
        self._build_marker_pixels()

    # -- one-time rasterization ---------------------------------------------

    def _boundaries(self) -> tuple[np.ndarray, np.ndarray]:
        index = self.index
        pts, h = resample_by_arclength(
            index.spec.centerline, self._grid_res * 2.0, closed=index.closed
        )
        if index.closed:
            nxt = np.roll(pts, -1, axis=0)
            prv = np.roll(pts, 1, axis=0)
        else:
            nxt = np.vstack([pts[1:], pts[-1:]])
            prv = np.vstack([pts[:1], pts[:-1]])
        tangents = nxt - prv
        norms = np.hypot(tangents[:, 0], tangents[:, 1])
        tangents /= norms[:, None]
        normals = np.column_stack([-tangents[:, 1], tangents[:, 0]])

        n = pts.shape[0]
        s = (np.arange(n) * h) if index.closed else np.linspace(0.0, index.total_length, n)
        wl = np.interp(s, index._interp_s, index._interp_wl)
        wr = np.interp(s, index._interp_s, index._interp_wr)
        left = pts + wl[:, None] * normals
        right = pts - wr[:, None] * normals
        return left, right

    def _ring_edges(self, ring: np.ndarray) -> np.ndarray:
        closed_ring = np.vstack([ring, ring[:1]])
        return np.column_stack([closed_ring[:-1], closed_ring[1:]])

    def _build_grid(self) -> None:
        left, right = self._boundaries()
        if self.index.closed:
            edges = np.vstack([self._ring_edges(left), self._ring_edges(right)])
        else:
            edges = self._ring_edges(np.vstack([left, right[::-1]]))

        margin = self.config.window_m * 0.75 + 5.0
        all_pts = np.vstack([left, right])
        self._gx0 = float(all_pts[:, 0].min() - margin)
        self._gy0 = float(all_pts[:, 1].min() - margin)
        gx1 = float(all_pts[:, 0].max() + margin)
        gy1 = float(all_pts[:, 1].max() + margin)
        res = self._grid_res
        nx = int(math.ceil((gx1 - self._gx0) / res))
        ny = int(math.ceil((gy1 - self._gy0) / res))
        grid = np.zeros((ny, nx), dtype=np.uint8)

        x1, y1, x2, y2 = edges.T
        dy = y2 - y1
        valid = dy != 0.0
        x1, y1, x2, y2, dy = x1[valid], y1[valid], x2[valid], y2[valid], dy[valid]
        slope = (x2 - x1) / dy
        for iy in range(ny):
            yc = self._gy0 + (iy + 0.5) * res
            mask = (y1 > yc) != (y2 > yc)
            if not mask.any():
                continue
            xs = np.sort(x1[mask] + (yc - y1[mask]) * slope[mask])
            for k in range(0, xs.shape[0] - 1, 2):
                lo = int(math.ceil((xs[k] - self._gx0) / res - 0.5))
                hi = int(math.floor((xs[k + 1] - self._gx0) / res - 0.5))
                if hi >= lo:
                    grid[iy, max(lo, 0) : min(hi + 1, nx)] = DRIVABLE

        # centerline stripe, one display pixel wide
        stripe, _ = resample_by_arclength(
            self.index.spec.centerline, res * 0.5, closed=self.index.closed
        )
        ix = np.floor((stripe[:, 0] - self._gx0) / res).astype(np.int64)
        iy = np.floor((stripe[:, 1] - self._gy0) / res).astype(np.int64)
        for ox in (-1, 0, 1):
            for oy in (-1, 0, 1):
                jx = np.clip(ix + ox, 0, nx - 1)
                jy = np.clip(iy + oy, 0, ny - 1)
                grid[jy, jx] = CENTERLINE
        self._grid = grid

    def _build_sampling_offsets(self) -> None:
        cfg = self.config
        res = self._display_res
        rows = np.arange(cfg.height)
        cols = np.arange(cfg.width)
        forward = (cfg.height / 2.0 - (rows + 0.5)) * res
        left = (cfg.width / 2.0 - (cols + 0.5)) * res
        self._forward = forward[:, None]  # (H, 1)
        self._left = left[None, :]  # (1, W)

    def _build_marker_pixels(self) -> None:
        cfg = self.config
        res = self._display_res
        half = self.vehicle.track_width / 2.0
        wheels = [
            (self.vehicle.wheelbase, half),
            (self.vehicle.wheelbase, -half),
            (0.0, half),
            (0.0, -half),
        ]
        pixels = []
        for f, l in wheels:
            r = int(round(cfg.height / 2.0 - f / res - 0.5))
            c = int(round(cfg.width / 2.0 - l / res - 0.5))
            for dr in (0, 1):
                for dc in (0, 1):
                    rr, cc = r + dr, c + dc
                    if 0 <= rr < cfg.height and 0 <= cc < cfg.width:
                        pixels.append((rr, cc))
        self._marker_rows = np.array([p[0] for p in pixels], dtype=np.int64)
        self._marker_cols = np.array([p[1] for p in pixels], dtype=np.int64)

    # -- per-frame rendering --------------------------------------------------

    def render(self, state: VehicleState) -> np.ndarray:
        """Ego-centered, heading-up view; (height, width, channels) uint8."""
        cos_y, sin_y = math.cos(state.yaw), math.sin(state.yaw)
        wx = state.x + self._forward * cos_y - self._left * sin_y
        wy = state.y + self._forward * sin_y + self._left * cos_y
        res = self._grid_res
        ix = np.floor((wx - self._gx0) / res).astype(np.int64)
        iy = np.floor((wy - self._gy0) / res).astype(np.int64)
        ny, nx = self._grid.shape
        inside = (ix >= 0) & (ix < nx) & (iy >= 0) & (iy < ny)
        frame = np.zeros((self.config.height, self.config.width), dtype=np.uint8)
        frame[inside] = self._grid[iy[inside], ix[inside]]
        frame[self._marker_rows, self._marker_cols] = EGO_MARKER
        if self.config.channels == 1:
            return frame[:, :, None]
        return np.repeat(frame[:, :, None], self.config.channels, axis=2)
