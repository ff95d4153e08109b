"""Bundled synthetic tracks and name/path resolution."""

from __future__ import annotations

from importlib import resources
from pathlib import Path

from .track import TrackError, TrackSpec, load_track

BUNDLED_TRACKS = ("oval", "scurve", "speedtrap")


def bundled_track_names() -> tuple[str, ...]:
    return BUNDLED_TRACKS


def load_bundled_track(name: str) -> TrackSpec:
    if name not in BUNDLED_TRACKS:
        raise TrackError(
            f"unknown bundled track {name!r}; available: {', '.join(BUNDLED_TRACKS)}"
        )
    data = resources.files("trackday").joinpath(f"data/tracks/{name}.json")
    return load_track(data.read_bytes())


def resolve_track(name_or_path: str | Path) -> TrackSpec:
    """Resolve a bundled track name (reserved) or a track JSON file path."""
    name = str(name_or_path)
    if name in BUNDLED_TRACKS:
        return load_bundled_track(name)
    path = Path(name_or_path)
    if path.exists():
        return load_track(path)
    raise TrackError(
        f"track {name!r} is neither a bundled name ({', '.join(BUNDLED_TRACKS)}) "
        "nor an existing file"
    )
