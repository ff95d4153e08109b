"""Pseudo-camera rasterization."""

import math

import numpy as np
import pytest

from trackday.camera import CENTERLINE, DRIVABLE, EGO_MARKER, OFF_TRACK, Camera, CameraConfig
from trackday.dynamics import VehicleParams, VehicleState
from trackday.engine import Engine, EpisodeConfig


@pytest.fixture(scope="module")
def oval_camera(oval_index):
    return Camera(oval_index, CameraConfig(enabled=True), VehicleParams())


def mid_straight_state(oval_index, offset=2.0):
    point, heading, _ = oval_index.sample_centerline(100.0)
    normal = np.array([-math.sin(heading), math.cos(heading)])
    pos = point + offset * normal
    return VehicleState(float(pos[0]), float(pos[1]), 0.0, heading)


class TestRender:
    def test_shape_and_channels(self, oval_camera, oval_index):
        frame = oval_camera.render(mid_straight_state(oval_index))
        assert frame.shape == (192, 192, 3)
        assert frame.dtype == np.uint8
        assert np.array_equal(frame[..., 0], frame[..., 1])
        assert np.array_equal(frame[..., 0], frame[..., 2])

    def test_center_pixel_on_track(self, oval_camera, oval_index):
        frame = oval_camera.render(mid_straight_state(oval_index, offset=2.0))
        assert frame[96, 96, 0] == DRIVABLE
        # track is 10 m wide inside a 60 m window: borders are off-track
        assert frame[0, 0, 0] == OFF_TRACK

    def test_centerline_stripe_visible(self, oval_camera, oval_index):
        frame = oval_camera.render(mid_straight_state(oval_index, offset=2.0))
        assert np.any(frame[..., 0] == CENTERLINE)

    def test_far_off_track_black_except_marker(self, oval_camera):
        frame = oval_camera.render(VehicleState(500.0, 500.0, 0.0, 0.3))
        values = set(np.unique(frame))
        assert values == {OFF_TRACK, EGO_MARKER}
        assert frame[96, 96, 0] == OFF_TRACK

    def test_ego_marker_painted(self, oval_camera, oval_index):
        frame = oval_camera.render(mid_straight_state(oval_index))
        assert np.count_nonzero(frame[..., 0] == EGO_MARKER) >= 8

    def test_deterministic(self, oval_camera, oval_index):
        state = mid_straight_state(oval_index, offset=-1.0)
        assert np.array_equal(oval_camera.render(state), oval_camera.render(state))

    def test_quarter_turn_rotates_raster(self, oval_camera, oval_index):
        state = mid_straight_state(oval_index, offset=1.0)
        turned = VehicleState(state.x, state.y, state.v, state.yaw + math.pi / 2.0)
        base = oval_camera.render(state)[..., 0]
        rotated = oval_camera.render(turned)[..., 0]
        agreement = np.mean(rotated == np.rot90(base, k=-1))
        assert agreement >= 0.95


class TestEngineIntegration:
    def test_engine_renders_when_enabled(self, oval_index):
        cfg = EpisodeConfig(track="oval", camera=CameraConfig(enabled=True, width=64, height=64))
        eng = Engine(cfg, index=oval_index)
        obs = eng.reset()
        assert obs.image is not None
        assert obs.image.shape == (64, 64, 3)
        obs, *_ = eng.step((0.5, 0.0))
        assert obs.image is not None

    def test_no_image_by_default(self, oval_index):
        eng = Engine(EpisodeConfig(track="oval"), index=oval_index)
        assert eng.reset().image is None

    def test_render_camera_on_demand(self, oval_index):
        eng = Engine(EpisodeConfig(track="oval"), index=oval_index)
        eng.reset()
        frame = eng.render_camera()
        assert frame.shape == (192, 192, 3)


class TestConfigValidation:
    def test_bad_sizes(self):
        with pytest.raises(ValueError):
            CameraConfig(width=4)
        with pytest.raises(ValueError):
            CameraConfig(channels=2)
        with pytest.raises(ValueError):
            CameraConfig(window_m=0.0)
