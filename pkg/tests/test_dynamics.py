"""Bicycle dynamics: derivatives, RK4 stepping, footprint, clamping."""

import math

import numpy as np
import pytest

from trackday import kernels
from trackday.dynamics import (
    ActionCommand,
    DynamicsDivergedError,
    Gear,
    VehicleParams,
    VehicleState,
    body_center,
    clamp_action,
    derivatives,
    step,
    wheel_positions,
)

PARAMS = VehicleParams()


class TestDerivatives:
    def test_standstill(self):
        state = VehicleState(0.0, 0.0, 0.0, 0.7)
        dx, dy, dv, dyaw = derivatives(state, ActionCommand(0.6, 1.0), PARAMS)
        assert (dx, dy, dyaw) == (0.0, 0.0, 0.0)
        assert dv == pytest.approx(PARAMS.accel_gain * 0.6)

    def test_straight_line_motion(self):
        state = VehicleState(0.0, 0.0, 10.0, 0.0)
        dx, dy, dv, dyaw = derivatives(state, ActionCommand(0.3, 0.0), PARAMS)
        assert dx == 10.0
        assert dy == 0.0
        assert dv == pytest.approx(3.0)
        assert dyaw == 0.0

    def test_yaw_rate_direct_evaluation(self):
        # independent scalar computation: v * tan(k2 * u) / L
        state = VehicleState(0.0, 0.0, 12.5, 0.0)
        _, _, _, dyaw = derivatives(state, ActionCommand(0.0, 1.0), PARAMS)
        expected = 12.5 * math.tan(0.3 * 1.0) / 2.7
        assert dyaw == pytest.approx(expected, rel=1e-12)
        assert dyaw == pytest.approx(1.4321, abs=1e-4)

    def test_planar_speed_equals_v(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            state = VehicleState(*rng.normal(size=2), float(rng.uniform(0, 30)), float(rng.uniform(-7, 7)))
            action = ActionCommand(*rng.uniform(-1, 1, size=2))
            dx, dy, _, _ = derivatives(state, action, PARAMS)
            assert math.hypot(dx, dy) == pytest.approx(state.v, rel=1e-15, abs=1e-15)

    def test_drag_reduces_acceleration_at_speed(self):
        params = VehicleParams(drag_coeff=0.01)
        slow = derivatives(VehicleState(0, 0, 1.0, 0.0), ActionCommand(1.0, 0.0), params)[2]
        fast = derivatives(VehicleState(0, 0, 25.0, 0.0), ActionCommand(1.0, 0.0), params)[2]
        assert fast < slow


class TestStep:
    def test_zero_action_standstill_fixed_point(self):
        state = VehicleState(3.0, -2.0, 0.0, 1.1)
        after = step(state, ActionCommand(0.0, 0.0), 0.1, PARAMS)
        assert after == state

    def test_full_throttle_from_rest_exact(self):
        after = step(VehicleState(0, 0, 0, 0), ActionCommand(1.0, 0.0), 0.1, PARAMS)
        assert after.v == pytest.approx(1.0, abs=1e-15)

    def test_circular_motion_closed_form(self):
        # constant speed and steering: the rear axle traces a circle of
        # radius L / tan(delta) at angular rate v * tan(delta) / L
        params = VehicleParams(drag_coeff=0.0)
        v = 10.0
        steer_cmd = 0.8
        delta = params.steer_gain * steer_cmd
        radius = params.wheelbase / math.tan(delta)
        omega = v / radius
        state = VehicleState(0.0, 0.0, v, 0.0)
        t_total = 4.0
        n_steps = 40
        for _ in range(n_steps):
            state = step(state, ActionCommand(0.0, steer_cmd), t_total / n_steps, params)
        heading_expected = omega * t_total
        x_expected = radius * math.sin(heading_expected)
        y_expected = radius * (1.0 - math.cos(heading_expected))
        assert state.yaw == pytest.approx(heading_expected, rel=1e-6)
        assert state.x == pytest.approx(x_expected, rel=1e-6)
        assert state.y == pytest.approx(y_expected, rel=1e-6)
        assert state.v == pytest.approx(v, abs=1e-12)

    def test_rk4_fourth_order_convergence(self):
        # fixed 0.8 s nonlinear maneuver integrated at three step sizes
        # against a much finer reference; global error scales as dt^4
        horizon = 0.8

        def run(n_sub):
            return np.array(
                kernels.bike_rk4(
                    0.0, 0.0, 5.0, 0.3, 0.7, 0.9,
                    PARAMS.accel_gain, PARAMS.steer_gain, 0.0, PARAMS.wheelbase,
                    horizon, n_sub,
                )
            )

        reference = run(102400)
        errors = [np.linalg.norm(run(round(horizon / dt)) - reference) for dt in (0.1, 0.05, 0.025)]
        # fourth order: halving dt cuts the error by ~16
        assert errors[0] / errors[1] == pytest.approx(16.0, rel=0.35)
        assert errors[1] / errors[2] == pytest.approx(16.0, rel=0.35)

    def test_equivariance_under_rigid_transform(self):
        actions = [ActionCommand(0.5, 0.4), ActionCommand(-0.2, -0.8), ActionCommand(0.9, 0.1)]
        base = VehicleState(0.0, 0.0, 7.0, 0.2)
        angle, shift = 1.23, np.array([40.0, -9.0])

        moved = VehicleState(
            float(shift[0] + base.x * math.cos(angle) - base.y * math.sin(angle)),
            float(shift[1] + base.x * math.sin(angle) + base.y * math.cos(angle)),
            base.v,
            base.yaw + angle,
        )
        for action in actions * 10:
            base = step(base, action, 0.1, PARAMS)
            moved = step(moved, action, 0.1, PARAMS)
        expected_x = shift[0] + base.x * math.cos(angle) - base.y * math.sin(angle)
        expected_y = shift[1] + base.x * math.sin(angle) + base.y * math.cos(angle)
        assert moved.x == pytest.approx(expected_x, abs=1e-9)
        assert moved.y == pytest.approx(expected_y, abs=1e-9)
        assert moved.yaw == pytest.approx(base.yaw + angle, abs=1e-9)
        assert moved.v == pytest.approx(base.v, abs=1e-12)

    def test_drag_terminal_speed_monotone(self):
        params = VehicleParams(drag_coeff=0.02)
        terminal = math.sqrt(params.accel_gain / params.drag_coeff)
        state = VehicleState(0, 0, 0, 0)
        speeds = []
        for _ in range(400):
            state = step(state, ActionCommand(1.0, 0.0), 0.1, params)
            speeds.append(state.v)
        diffs = np.diff(speeds)
        assert np.all(diffs >= -1e-12)
        assert speeds[-1] == pytest.approx(terminal, rel=1e-3)
        assert speeds[-1] <= terminal + 1e-9

    def test_speed_floored_at_zero(self):
        state = VehicleState(0, 0, 0.3, 0.0)
        after = step(state, ActionCommand(-1.0, 0.0), 0.1, PARAMS)
        assert after.v == 0.0

    def test_invalid_dt(self):
        with pytest.raises(ValueError):
            step(VehicleState(0, 0, 0, 0), ActionCommand(0, 0), 0.0, PARAMS)

    def test_divergence_raises(self):
        params = VehicleParams(accel_gain=1e308)
        with pytest.raises(DynamicsDivergedError):
            step(VehicleState(0, 0, 1.0, 0.0), ActionCommand(1.0, 0.0), 0.1, params)


class TestWheelPositions:
    def test_axis_aligned(self):
        wheels = wheel_positions(VehicleState(0, 0, 0, 0.0), PARAMS)
        assert np.allclose(wheels[0], (2.7, 0.8))
        assert np.allclose(wheels[1], (2.7, -0.8))
        assert np.allclose(wheels[2], (0.0, 0.8))
        assert np.allclose(wheels[3], (0.0, -0.8))

    def test_quarter_turn(self):
        wheels = wheel_positions(VehicleState(0, 0, 0, math.pi / 2.0), PARAMS)
        assert np.allclose(wheels[0], (-0.8, 2.7))

    def test_rotation_matrix_oracle(self):
        state = VehicleState(5.0, 3.0, 0.0, 0.3)
        wheels = wheel_positions(state, PARAMS)
        c, s = math.cos(0.3), math.sin(0.3)
        rot = np.array([[c, -s], [s, c]])
        body = np.array([[2.7, 0.8], [2.7, -0.8], [0.0, 0.8], [0.0, -0.8]])
        expected = (rot @ body.T).T + np.array([5.0, 3.0])
        assert np.max(np.abs(wheels - expected)) < 1e-12

    def test_body_center(self):
        cx, cy = body_center(VehicleState(1.0, 2.0, 0.0, 0.0), PARAMS)
        assert (cx, cy) == (1.0 + 1.35, 2.0)


class TestClampAction:
    def test_identity_inside_range(self):
        cmd, warn = clamp_action(0.5, -0.2)
        assert (cmd.acceleration, cmd.steering) == (0.5, -0.2)
        assert not warn

    def test_saturation(self):
        cmd, warn = clamp_action(3.0, -9.0)
        assert (cmd.acceleration, cmd.steering) == (1.0, -1.0)
        assert not warn

    def test_nan_maps_to_zero_with_flag(self):
        cmd, warn = clamp_action(float("nan"), 0.1)
        assert (cmd.acceleration, cmd.steering) == (0.0, 0.1)
        assert warn

    def test_infinity_maps_to_zero_with_flag(self):
        cmd, warn = clamp_action(0.2, float("-inf"))
        assert (cmd.acceleration, cmd.steering) == (0.2, 0.0)
        assert warn

    def test_gear_passthrough(self):
        cmd, _ = clamp_action(0.0, 0.0, Gear.NEUTRAL)
        assert cmd.gear is Gear.NEUTRAL


class TestValidation:
    def test_negative_speed_rejected(self):
        with pytest.raises(ValueError):
            VehicleState(0, 0, -1.0, 0)

    def test_non_finite_state_rejected(self):
        with pytest.raises(DynamicsDivergedError):
            VehicleState(float("nan"), 0, 0, 0)

    def test_param_bounds(self):
        with pytest.raises(ValueError):
            VehicleParams(wheelbase=0.0)
        with pytest.raises(ValueError):
            VehicleParams(steer_gain=2.0)

    def test_yaw_wrapped_property(self):
        state = VehicleState(0, 0, 0, 3.0 * math.pi)
        assert state.yaw_wrapped == pytest.approx(math.pi)
        assert state.yaw == 3.0 * math.pi
