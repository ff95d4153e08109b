"""Generate the bundled synthetic track files.

Run from the repository root after changing any layout parameters:

    python3 tools/gen_tracks.py

Writes JSON files into src/trackday/data/tracks/ and validates each
through the normal loading path (including the self-intersection check).
"""

from __future__ import annotations

import math
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from trackday.geometry import polyline_arclength
from trackday.track import TrackIndex, TrackSpec, load_track, save_track

OUT_DIR = Path(__file__).resolve().parents[1] / "src" / "trackday" / "data" / "tracks"


class PathBuilder:
    """March line/arc primitives, collecting points (segment ends excluded)."""

    def __init__(self, start: tuple[float, float], heading: float):
        self.pos = np.asarray(start, dtype=np.float64)
        self.heading = float(heading)
        self.points: list[np.ndarray] = []

    def straight(self, length: float, spacing: float) -> None:
        n = max(1, int(round(length / spacing)))
        step = length / n
        direction = np.array([math.cos(self.heading), math.sin(self.heading)])
        for i in range(n):
            self.points.append(self.pos + i * step * direction)
        self.pos = self.pos + length * direction

    def arc(self, radius: float, angle: float, spacing: float) -> None:
        """Constant-radius arc; positive angle turns left."""
        arc_len = abs(angle) * radius
        n = max(1, int(round(arc_len / spacing)))
        dtheta = angle / n
        side = 1.0 if angle > 0 else -1.0
        normal = np.array([-math.sin(self.heading), math.cos(self.heading)])
        center = self.pos + side * radius * normal
        offset = self.pos - center
        for i in range(n):
            theta = i * dtheta
            c, s = math.cos(theta), math.sin(theta)
            rot = np.array([[c, -s], [s, c]])
            self.points.append(center + rot @ offset)
        c, s = math.cos(angle), math.sin(angle)
        self.pos = center + np.array([[c, -s], [s, c]]) @ offset
        self.heading += angle

    def build(self) -> np.ndarray:
        return np.asarray(self.points)


def make_oval() -> TrackSpec:
    """Two 200 m straights joined by radius-30 m semicircles; width 10 m."""
    b = PathBuilder((-100.0, -30.0), 0.0)
    b.straight(200.0, 1.0)
    b.arc(30.0, math.pi, 0.5)
    b.straight(200.0, 1.0)
    b.arc(30.0, math.pi, 0.5)
    return TrackSpec(
        name="oval",
        centerline=b.build(),
        half_width_left=5.0,
        half_width_right=5.0,
        closed=True,
    )


def make_scurve() -> TrackSpec:
    """Rounded-triangle circuit with alternating-direction curves; width 9 m."""
    theta = np.linspace(0.0, 2.0 * math.pi, 600, endpoint=False)
    r = 60.0 + 14.0 * np.sin(3.0 * theta)
    centerline = np.column_stack([r * np.cos(theta), r * np.sin(theta)])
    return TrackSpec(
        name="scurve",
        centerline=centerline,
        half_width_left=4.5,
        half_width_right=4.5,
        closed=True,
    )


def make_speedtrap() -> TrackSpec:
    """Rounded rectangle with one long straight pinching from 10 m to 6 m."""
    b = PathBuilder((0.0, 0.0), 0.0)
    for length in (350.0, 60.0, 350.0, 60.0):
        b.straight(length, 1.5)
        b.arc(20.0, math.pi / 2.0, 0.75)
    centerline = b.build()
    s = polyline_arclength(centerline)
    pinch = 2.0 * np.exp(-(((s - 330.0) / 25.0) ** 2))
    widths = 5.0 - pinch
    return TrackSpec(
        name="speedtrap",
        centerline=centerline,
        half_width_left=widths,
        half_width_right=widths.copy(),
        closed=True,
    )


def main() -> None:
    OUT_DIR.mkdir(parents=True, exist_ok=True)
    for spec in (make_oval(), make_scurve(), make_speedtrap()):
        path = OUT_DIR / f"{spec.name}.json"
        save_track(spec, path)
        reloaded = load_track(path)
        index = TrackIndex(reloaded)
        print(
            f"{spec.name}: {reloaded.centerline.shape[0]} points, "
            f"length {index.total_length:.3f} m -> {path}"
        )


if __name__ == "__main__":
    main()
