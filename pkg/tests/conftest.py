import pytest

from trackday.library import load_bundled_track
from trackday.track import TrackIndex


@pytest.fixture(scope="session")
def oval_index() -> TrackIndex:
    return TrackIndex(load_bundled_track("oval"))


@pytest.fixture(scope="session")
def scurve_index() -> TrackIndex:
    return TrackIndex(load_bundled_track("scurve"))


@pytest.fixture(scope="session")
def speedtrap_index() -> TrackIndex:
    return TrackIndex(load_bundled_track("speedtrap"))
