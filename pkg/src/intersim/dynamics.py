"""Discrete-time uni-cycle vehicle model and the shared maneuver set.

State update per frame (dt seconds):
    x' = x + v cos(gamma) dt
    y' = y + v sin(gamma) dt
    v' = max(0, v + a dt)          (no reverse driving)
    gamma' = wrap(gamma + omega dt)
Position uses the pre-update speed and heading; this ordering is load-bearing
for every test in the suite, do not "fix" it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

DT_DEFAULT = 0.1


def normalize_angle(theta: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    wrapped = math.fmod(theta + math.pi, 2.0 * math.pi)
    if wrapped <= 0.0:
        wrapped += 2.0 * math.pi
    return wrapped - math.pi


@dataclass(frozen=True)
class VehicleState:
    """Planar pose plus scalar speed of one vehicle at one frame."""

    x: float
    y: float
    v: float
    gamma: float

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.v, self.gamma], dtype=float)

    @property
    def position(self) -> np.ndarray:
        return np.array([self.x, self.y], dtype=float)

    @property
    def velocity(self) -> np.ndarray:
        return np.array(
            [self.v * math.cos(self.gamma), self.v * math.sin(self.gamma)], dtype=float
        )


@dataclass(frozen=True)
class Action:
    """Acceleration / yaw-rate pair. Game play draws from the fixed six-element set."""

    a: float
    omega: float


ACTION_MAINTAIN = 0
ACTION_ACCELERATE = 1
ACTION_DECELERATE = 2
ACTION_BRAKE = 3
ACTION_TURN_LEFT = 4
ACTION_TURN_RIGHT = 5

_ACTION_SET = (
    Action(0.0, 0.0),
    Action(2.0, 0.0),
    Action(-2.0, 0.0),
    Action(-4.0, 0.0),
    Action(0.0, math.pi / 4.0),
    Action(0.0, -math.pi / 4.0),
)

ACTION_NAMES = ("maintain", "accelerate", "decelerate", "brake", "turn_left", "turn_right")


def action_set() -> list[Action]:
    """The six discrete maneuvers, in fixed order."""
    return list(_ACTION_SET)


def step(state: VehicleState, action: Action, dt: float) -> VehicleState:
    """Advance one frame. Position uses pre-update v and gamma."""
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    x = state.x + state.v * math.cos(state.gamma) * dt
    y = state.y + state.v * math.sin(state.gamma) * dt
    v = max(0.0, state.v + action.a * dt)
    gamma = normalize_angle(state.gamma + action.omega * dt)
    return VehicleState(x, y, v, gamma)


@dataclass
class Trajectory:
    """Timestamped state sequence, one row (x, y, v, gamma) per frame."""

    states: np.ndarray  # (n, 4) float array
    dt: float
    t0: float = 0.0

    def __post_init__(self):
        self.states = np.asarray(self.states, dtype=float)
        if self.states.ndim != 2 or self.states.shape[1] != 4:
            raise ValueError("trajectory states must be (n, 4)")

    def __len__(self) -> int:
        return self.states.shape[0]

    @property
    def positions(self) -> np.ndarray:
        return self.states[:, :2]

    @property
    def speeds(self) -> np.ndarray:
        return self.states[:, 2]

    @property
    def headings(self) -> np.ndarray:
        return self.states[:, 3]

    def state(self, i: int) -> VehicleState:
        x, y, v, g = self.states[i]
        return VehicleState(x, y, v, g)

    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(len(self))


def rollout(state: VehicleState, action: Action, horizon: int, dt: float) -> Trajectory:
    """Hold one action constant for `horizon` frames; includes the start state."""
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    out = np.empty((horizon + 1, 4), dtype=float)
    out[0] = state.as_array()
    cur = state
    for i in range(horizon):
        cur = step(cur, action, dt)
        out[i + 1] = cur.as_array()
    return Trajectory(out, dt)


def rollout_all_actions(state: VehicleState, horizon: int, dt: float) -> np.ndarray:
    """Vectorized rollouts of the whole action set.

    Returns an array of shape (6, horizon + 1, 4) whose slice [i] equals
    rollout(state, action_set()[i], ...).states.
    """
    acts = np.array([[a.a, a.omega] for a in _ACTION_SET])
    n = len(_ACTION_SET)
    out = np.empty((n, horizon + 1, 4), dtype=float)
    out[:, 0, :] = state.as_array()
    x = np.full(n, state.x)
    y = np.full(n, state.y)
    v = np.full(n, state.v)
    g = np.full(n, state.gamma)
    for k in range(horizon):
        x = x + v * np.cos(g) * dt
        y = y + v * np.sin(g) * dt
        v = np.maximum(0.0, v + acts[:, 0] * dt)
        g = np.mod(g + acts[:, 1] * dt + np.pi, 2.0 * np.pi)
        g = np.where(g <= 0.0, g + 2.0 * np.pi, g) - np.pi
        out[:, k + 1, 0] = x
        out[:, k + 1, 1] = y
        out[:, k + 1, 2] = v
        out[:, k + 1, 3] = g
    return out


def constant_velocity_trajectory(state: VehicleState, horizon: int, dt: float) -> Trajectory:
    """Straight-line constant-speed extrapolation, horizon + 1 states."""
    t = dt * np.arange(horizon + 1)
    out = np.empty((horizon + 1, 4), dtype=float)
    out[:, 0] = state.x + state.v * math.cos(state.gamma) * t
    out[:, 1] = state.y + state.v * math.sin(state.gamma) * t
    out[:, 2] = state.v
    out[:, 3] = state.gamma
    return Trajectory(out, dt)
