"""Baseline agents: a centerline-tracking MPC solved by iLQR, and a
uniform-random agent.

The MPC minimizes a quadratic tracking cost against reference states
sampled ahead along the centerline at the reference speed, subject to
the discrete bicycle dynamics and box action bounds:

    min   sum_k (s_k - ref_k)^T Q (s_k - ref_k) + a_k^T R a_k
    s.t.  s_{k+1} = s_k + dt * f(s_k, a_k),   lo <= a_k <= hi

The solver alternates linearization along the current trajectory, a
time-varying Riccati backward pass, and a clamped forward rollout with
backtracking line search; accepted iterations never increase the cost.
Box bounds are handled by clamping in the forward pass, which is
adequate at short horizons. The solver's internal model is forward
Euler, so there is a deliberate, realistic gap to the RK4 plant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .dynamics import ActionCommand, VehicleState
from .engine import Observation
from .geometry import unwrap_near
from .track import TrackIndex

STATE_DIM = 4  # [x, y, v, yaw]
ACTION_DIM = 2  # [acceleration command, steering command]


class SteeringSingularityError(ValueError):
    """Steering angle reached +-pi/2 where tan() blows up."""


class SolverDivergedError(RuntimeError):
    """The iLQR iteration produced a non-finite cost."""


@dataclass(frozen=True)
class MpcConfig:
    """Weights, horizon, bounds, and internal model of the tracking MPC."""

    state_weights: tuple[float, float, float, float] = (1.0, 1.0, 1.0, 16.0)
    action_weights: tuple[float, float] = (0.1, 1.0)
    v_ref: float = 12.5  # m/s
    horizon: int = 6
    action_lower: tuple[float, float] = (-1.0, -1.0)
    action_upper: tuple[float, float] = (1.0, 1.0)
    wheelbase: float = 2.7
    accel_gain: float = 10.0
    steer_gain: float = 0.3
    dt_model: float = 0.1
    max_iters: int = 50
    cost_tolerance: float = 1e-6
    line_search_alphas: tuple[float, ...] = (1.0, 0.5, 0.25, 0.125, 0.0625)
    warm_start: bool = False

    def __post_init__(self) -> None:
        if any(w < 0.0 for w in self.state_weights):
            raise ValueError("state weights must be >= 0")
        if any(w <= 0.0 for w in self.action_weights):
            raise ValueError("action weights must be > 0")
        if self.horizon < 2:
            raise ValueError("horizon must be >= 2")
        if not all(l < u for l, u in zip(self.action_lower, self.action_upper)):
            raise ValueError("action bounds must satisfy lower < upper")

    def to_dict(self) -> dict:
        from dataclasses import asdict

        return asdict(self)

    @classmethod
    def from_dict(cls, doc: dict) -> "MpcConfig":
        doc = dict(doc)
        for key in ("state_weights", "action_weights", "action_lower", "action_upper",
                    "line_search_alphas"):
            if key in doc:
                doc[key] = tuple(doc[key])
        return cls(**doc)


def mpc_preset(name: str = "matched") -> MpcConfig:
    """Named configurations.

    ``matched``: model gains equal to the simulator ground truth.
    ``paper-estimates``: the historical estimated gains (steer gain 6
    with tight steering bounds), kept for model-mismatch studies.
    """
    if name == "matched":
        return MpcConfig()
    if name == "paper-estimates":
        return MpcConfig(steer_gain=6.0, action_lower=(-1.0, -0.2), action_upper=(1.0, 0.2))
    raise ValueError(f"unknown MPC preset {name!r}; use 'matched' or 'paper-estimates'")


@dataclass(frozen=True)
class ReferenceTrajectory:
    """Horizon+1 reference states [x, y, v_ref, yaw_ref] on the centerline."""

    states: np.ndarray

    def __post_init__(self) -> None:
        states = np.asarray(self.states, dtype=np.float64)
        if states.ndim != 2 or states.shape[1] != STATE_DIM:
            raise ValueError("reference states must have shape (T+1, 4)")
        object.__setattr__(self, "states", states)


@dataclass(frozen=True)
class IlqrSolution:
    """Solver output: nominal trajectory, actions, and convergence data."""

    states: np.ndarray  # (T+1, 4)
    actions: np.ndarray  # (T, 2)
    cost: float
    iterations: int
    converged: bool
    cost_trace: np.ndarray = field(default_factory=lambda: np.empty(0))  # accepted costs


class BikeModel:
    """Forward-Euler discrete bicycle model with analytic Jacobians."""

    def __init__(self, wheelbase: float, accel_gain: float, steer_gain: float, dt: float):
        self.wheelbase = wheelbase
        self.accel_gain = accel_gain
        self.steer_gain = steer_gain
        self.dt = dt

    def step(self, state: np.ndarray, action: np.ndarray) -> np.ndarray:
        x, y, v, yaw = state
        delta = self.steer_gain * action[1]
        dt = self.dt
        return np.array(
            [
                x + dt * v * math.cos(yaw),
                y + dt * v * math.sin(yaw),
                v + dt * self.accel_gain * action[0],
                yaw + dt * v * math.tan(delta) / self.wheelbase,
            ]
        )

    def jacobians(self, state: np.ndarray, action: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        _, _, v, yaw = state
        delta = self.steer_gain * action[1]
        if abs(delta) >= math.pi / 2.0:
            raise SteeringSingularityError(
                f"steering angle {delta:.3f} rad at or beyond pi/2"
            )
        dt = self.dt
        cos_y, sin_y = math.cos(yaw), math.sin(yaw)
        A = np.eye(STATE_DIM)
        A[0, 2] = dt * cos_y
        A[0, 3] = -dt * v * sin_y
        A[1, 2] = dt * sin_y
        A[1, 3] = dt * v * cos_y
        A[3, 2] = dt * math.tan(delta) / self.wheelbase
        B = np.zeros((STATE_DIM, ACTION_DIM))
        B[2, 0] = dt * self.accel_gain
        sec = 1.0 / math.cos(delta)
        B[3, 1] = dt * v * self.steer_gain * sec * sec / self.wheelbase
        return A, B


def linearize(
    state, action, config: MpcConfig
) -> tuple[np.ndarray, np.ndarray]:
    """Analytic Jacobians (A, B) of the discrete model at (state, action)."""
    model = BikeModel(config.wheelbase, config.accel_gain, config.steer_gain, config.dt_model)
    return model.jacobians(np.asarray(state, dtype=np.float64), np.asarray(action, dtype=np.float64))


def build_reference(
    state: VehicleState, index: TrackIndex, config: MpcConfig
) -> ReferenceTrajectory:
    """Reference states ahead of the vehicle along the centerline.

    Point k sits v_ref * dt_model * k meters past the vehicle's
    projection; reference headings are unwrapped starting from the
    branch nearest the vehicle's yaw so tracking never sees a +-pi jump.
    """
    proj = index.project((state.x, state.y))
    step = config.v_ref * config.dt_model
    states = np.empty((config.horizon + 1, STATE_DIM))
    prev_yaw = state.yaw
    for k in range(config.horizon + 1):
        point, heading, _ = index.sample_centerline(proj.s + k * step)
        yaw_ref = unwrap_near(heading, prev_yaw)
        prev_yaw = yaw_ref
        states[k] = (point[0], point[1], config.v_ref, yaw_ref)
    return ReferenceTrajectory(states)


def _rollout(model, x0: np.ndarray, actions: np.ndarray) -> np.ndarray:
    states = np.empty((actions.shape[0] + 1, STATE_DIM))
    states[0] = x0
    for k in range(actions.shape[0]):
        states[k + 1] = model.step(states[k], actions[k])
    return states


def _total_cost(states, actions, ref, Q_diag, R_diag) -> float:
    err = states - ref
    return float(np.sum(err * err @ Q_diag) + np.sum(actions * actions @ R_diag))


def ilqr_solve(
    initial_state,
    reference: ReferenceTrajectory,
    config: MpcConfig,
    model: Optional[BikeModel] = None,
    initial_actions: Optional[np.ndarray] = None,
) -> IlqrSolution:
    """Iterative LQR with clamped forward passes and backtracking search.

    Actions initialize to zero (or ``initial_actions`` for warm starts).
    Each iteration linearizes along the nominal trajectory, runs the
    time-varying Riccati backward pass on the quadratic tracking cost,
    and rolls the feedback policy forward, clamping controls to bounds
    at every step; candidate trajectories are accepted only if they
    lower the cost. Stops when the cost improvement drops below
    ``cost_tolerance`` or on iteration limit.
    """
    T = config.horizon
    ref = reference.states
    if ref.shape[0] != T + 1:
        raise ValueError(f"reference must have horizon+1={T + 1} states, got {ref.shape[0]}")
    if model is None:
        model = BikeModel(config.wheelbase, config.accel_gain, config.steer_gain, config.dt_model)
    x0 = np.asarray(initial_state, dtype=np.float64)
    lo = np.asarray(config.action_lower)
    hi = np.asarray(config.action_upper)
    Q_diag = np.asarray(config.state_weights, dtype=np.float64)
    R_diag = np.asarray(config.action_weights, dtype=np.float64)
    Q2 = 2.0 * np.diag(Q_diag)
    R2 = 2.0 * np.diag(R_diag)

    if initial_actions is not None:
        actions = np.clip(np.asarray(initial_actions, dtype=np.float64).copy(), lo, hi)
    else:
        actions = np.zeros((T, ACTION_DIM))
    states = _rollout(model, x0, actions)
    cost = _total_cost(states, actions, ref, Q_diag, R_diag)
    if not math.isfinite(cost):
        raise SolverDivergedError(f"initial rollout cost is non-finite ({cost})")

    cost_trace = [cost]
    converged = False
    iterations = 0
    for _ in range(config.max_iters):
        iterations += 1
        A_seq = np.empty((T, STATE_DIM, STATE_DIM))
        B_seq = np.empty((T, STATE_DIM, ACTION_DIM))
        for k in range(T):
            A_seq[k], B_seq[k] = model.jacobians(states[k], actions[k])

        # backward Riccati pass on the quadratic expansion
        k_ff = np.empty((T, ACTION_DIM))
        K_fb = np.empty((T, ACTION_DIM, STATE_DIM))
        Vx = Q2 @ (states[T] - ref[T])
        Vxx = Q2.copy()
        for k in range(T - 1, -1, -1):
            A, B = A_seq[k], B_seq[k]
            Qx = Q2 @ (states[k] - ref[k]) + A.T @ Vx
            Qu = R2 @ actions[k] + B.T @ Vx
            Qxx = Q2 + A.T @ Vxx @ A
            Quu = R2 + B.T @ Vxx @ B
            Qux = B.T @ Vxx @ A
            Quu_inv = np.linalg.inv(Quu)
            k_ff[k] = -Quu_inv @ Qu
            K_fb[k] = -Quu_inv @ Qux
            Vx = Qx + K_fb[k].T @ Quu @ k_ff[k] + K_fb[k].T @ Qu + Qux.T @ k_ff[k]
            Vxx = Qxx + K_fb[k].T @ Quu @ K_fb[k] + K_fb[k].T @ Qux + Qux.T @ K_fb[k]
            Vxx = 0.5 * (Vxx + Vxx.T)

        # clamped forward pass with backtracking line search
        improvement = 0.0
        accepted = False
        for alpha in config.line_search_alphas:
            new_states = np.empty_like(states)
            new_actions = np.empty_like(actions)
            new_states[0] = x0
            for k in range(T):
                du = alpha * k_ff[k] + K_fb[k] @ (new_states[k] - states[k])
                new_actions[k] = np.clip(actions[k] + du, lo, hi)
                new_states[k + 1] = model.step(new_states[k], new_actions[k])
            new_cost = _total_cost(new_states, new_actions, ref, Q_diag, R_diag)
            if not math.isfinite(new_cost):
                raise SolverDivergedError(f"line-search cost is non-finite ({new_cost})")
            if new_cost < cost:
                improvement = cost - new_cost
                states, actions, cost = new_states, new_actions, new_cost
                cost_trace.append(cost)
                accepted = True
                break
        if not accepted or improvement < config.cost_tolerance:
            converged = True
            break

    return IlqrSolution(states=states, actions=actions, cost=cost,
                        iterations=iterations, converged=converged,
                        cost_trace=np.asarray(cost_trace))


class MpcPolicy:
    """Receding-horizon centerline tracker over the observation vector.

    Reconstructs [x, y, v, yaw] from the multimodal observation (the
    vehicle-center slots are shifted back to the rear axle using the
    model wheelbase), builds the lookahead reference, solves, and emits
    the first action clamped to bounds. Solver failures fall back to
    gentle braking with a flag in the returned info.
    """

    FALLBACK = ActionCommand(-0.5, 0.0)

    def __init__(self, index: TrackIndex, config: Optional[MpcConfig] = None):
        self.index = index
        self.config = config or mpc_preset("matched")
        self._warm_actions: Optional[np.ndarray] = None

    def reset(self, seed: Optional[int] = None) -> None:
        self._warm_actions = None

    def act(self, observation: Observation) -> tuple[ActionCommand, dict]:
        cfg = self.config
        vec = observation.multimodal
        yaw = float(vec[12])
        v = float(math.hypot(vec[3], vec[4]))
        center_y, center_x = float(vec[15]), float(vec[16])
        half = cfg.wheelbase / 2.0
        state = VehicleState(
            x=center_x - half * math.cos(yaw),
            y=center_y - half * math.sin(yaw),
            v=v,
            yaw=yaw,
        )
        reference = build_reference(state, self.index, cfg)
        x0 = np.array([state.x, state.y, state.v, state.yaw])
        try:
            solution = ilqr_solve(
                x0, reference, cfg,
                initial_actions=self._warm_actions if cfg.warm_start else None,
            )
        except (SolverDivergedError, SteeringSingularityError) as exc:
            self._warm_actions = None
            return self.FALLBACK, {"fallback": True, "error": str(exc)}
        if cfg.warm_start:
            self._warm_actions = np.vstack([solution.actions[1:], solution.actions[-1:]])
        first = np.clip(solution.actions[0], cfg.action_lower, cfg.action_upper)
        first = np.clip(first, -1.0, 1.0)
        info = {
            "fallback": False,
            "cost": solution.cost,
            "iterations": solution.iterations,
            "converged": solution.converged,
        }
        return ActionCommand(float(first[0]), float(first[1])), info


class RandomPolicy:
    """I.i.d. uniform actions on [-1, 1]^2 from a seeded generator."""

    def __init__(self, seed: Optional[int] = None):
        self._seed = seed
        self._rng = np.random.default_rng(seed)

    def reset(self, seed: Optional[int] = None) -> None:
        if seed is not None:
            self._seed = seed
        self._rng = np.random.default_rng(self._seed)

    def act(self, observation: Observation) -> tuple[ActionCommand, dict]:
        accel, steer = self._rng.uniform(-1.0, 1.0, size=2)
        return ActionCommand(float(accel), float(steer)), {}
