"""Efficiency / comfort / safety features and the linear reward.

Feature conventions (all penalties, weights nonnegative):
    f_eff  = -d          d: remaining arclength to the path end, meters
    f_comf = -o          o: absolute lateral offset from the reference path
    f_safe = -min(1/TTC, 1/TTC_FLOOR)

TTC is the earliest time constant-velocity straight-line extrapolations bring
two disc footprints into contact. The safety term enters with a negative sign
so that a larger safety weight always means more caution.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import Action, Trajectory, VehicleState, step
from .scenario import ReferencePath

FOOTPRINT_RADIUS = 1.5  # disc footprint, meters
TTC_FLOOR = 0.1  # seconds; bounds 1/TTC at 10


@dataclass(frozen=True)
class RewardWeights:
    w_eff: float
    w_comf: float
    w_safe: float

    def __post_init__(self):
        if min(self.w_eff, self.w_comf, self.w_safe) < 0.0:
            raise ValueError("reward weights must be nonnegative")

    def as_array(self) -> np.ndarray:
        return np.array([self.w_eff, self.w_comf, self.w_safe], dtype=float)


@dataclass(frozen=True)
class FeatureVector:
    f_eff: float
    f_comf: float
    f_safe: float

    def as_array(self) -> np.ndarray:
        return np.array([self.f_eff, self.f_comf, self.f_safe], dtype=float)


def distance_to_destination(state: VehicleState, path: ReferencePath) -> float:
    """Remaining arclength from the projected position to the path end."""
    s, _ = path.project_many(state.position.reshape(1, 2))
    return float(path.length - s[0])


def path_offset(state: VehicleState, path: ReferencePath) -> float:
    """Unsigned lateral offset from the reference path."""
    _, l = path.project_many(state.position.reshape(1, 2))
    return float(abs(l[0]))


def ttc_array(rel_pos: np.ndarray, rel_vel: np.ndarray, contact: float) -> np.ndarray:
    """Vectorized time-to-contact for relative motion arrays of shape (..., 2).

    Returns +inf where the extrapolations never reach `contact` distance and
    0 where the footprints already overlap.
    """
    rel_pos = np.asarray(rel_pos, dtype=float)
    rel_vel = np.asarray(rel_vel, dtype=float)
    c = np.sum(rel_pos**2, axis=-1) - contact**2
    a = np.sum(rel_vel**2, axis=-1)
    b = 2.0 * np.sum(rel_pos * rel_vel, axis=-1)
    out = np.full(c.shape, np.inf)
    overlap = c <= 0.0
    out[overlap] = 0.0
    disc = b**2 - 4.0 * a * c
    moving = (a > 1e-12) & ~overlap & (disc >= 0.0)
    sqrt_disc = np.sqrt(np.where(moving, disc, 0.0))
    t_first = np.where(moving, (-b - sqrt_disc) / (2.0 * np.where(a > 1e-12, a, 1.0)), np.inf)
    hit = moving & (t_first >= 0.0)
    out[hit] = t_first[hit]
    return out


def time_to_collision(
    ego: VehicleState, others: list[VehicleState], footprint_radius: float = FOOTPRINT_RADIUS
) -> float:
    """Minimum TTC against any opponent under constant-velocity extrapolation."""
    if footprint_radius <= 0.0:
        raise ValueError("footprint_radius must be positive")
    if not others:
        return float("inf")
    rel_p = np.stack([o.position - ego.position for o in others])
    rel_v = np.stack([o.velocity - ego.velocity for o in others])
    return float(np.min(ttc_array(rel_p, rel_v, 2.0 * footprint_radius)))


def inverse_ttc(ttc) -> np.ndarray:
    """min(1/TTC, 1/TTC_FLOOR), elementwise; TTC below the floor saturates."""
    ttc = np.asarray(ttc, dtype=float)
    capped = np.maximum(ttc, TTC_FLOOR)
    return 1.0 / capped


def feature_vector(
    state: VehicleState,
    path: ReferencePath,
    others: list[VehicleState],
    footprint_radius: float = FOOTPRINT_RADIUS,
) -> FeatureVector:
    s, l = path.project_many(state.position.reshape(1, 2))
    d = path.length - float(s[0])
    o = abs(float(l[0]))
    ttc = time_to_collision(state, others, footprint_radius)
    return FeatureVector(-d, -o, -float(inverse_ttc(ttc)))


def reward(
    ego_state: VehicleState,
    ego_action: Action,
    opponents: list[tuple[VehicleState, Action]],
    path: ReferencePath,
    weights: RewardWeights,
    dt: float,
    footprint_radius: float = FOOTPRINT_RADIUS,
) -> float:
    """One-step reward: advance everyone one frame, dot features with weights."""
    ego_next = step(ego_state, ego_action, dt)
    others_next = [step(s, a, dt) for s, a in opponents]
    f = feature_vector(ego_next, path, others_next, footprint_radius)
    return float(np.dot(f.as_array(), weights.as_array()))


def feature_series(
    states: np.ndarray,
    path: ReferencePath,
    opponent_states: np.ndarray | None,
    footprint_radius: float = FOOTPRINT_RADIUS,
) -> np.ndarray:
    """Per-frame feature rows for a state sequence.

    states: (n, 4); opponent_states: (k, n, 4) aligned per frame, or None.
    Returns (n, 3) with columns (f_eff, f_comf, f_safe).
    """
    states = np.asarray(states, dtype=float)
    n = states.shape[0]
    s, l = path.project_many(states[:, :2])
    out = np.empty((n, 3), dtype=float)
    out[:, 0] = -(path.length - s)
    out[:, 1] = -np.abs(l)
    if opponent_states is None or opponent_states.shape[0] == 0:
        out[:, 2] = 0.0
        return out
    opp = np.asarray(opponent_states, dtype=float)
    ego_pos = states[None, :, :2]
    ego_vel = states[:, 2:3] * np.stack([np.cos(states[:, 3]), np.sin(states[:, 3])], axis=1)
    ego_vel = ego_vel[None, :, :]
    opp_pos = opp[:, :, :2]
    opp_vel = (opp[:, :, 2:3] * np.stack([np.cos(opp[:, :, 3]), np.sin(opp[:, :, 3])], axis=2))
    ttc = ttc_array(opp_pos - ego_pos, opp_vel - ego_vel, 2.0 * footprint_radius)  # (k, n)
    out[:, 2] = -np.max(inverse_ttc(ttc), axis=0)
    return out


def trajectory_reward(
    traj: Trajectory,
    path: ReferencePath,
    opponent_states: np.ndarray | None,
    weights: RewardWeights,
    footprint_radius: float = FOOTPRINT_RADIUS,
) -> float:
    """Mean per-frame reward over a trajectory (horizon-averaged)."""
    f = feature_series(traj.states, path, opponent_states, footprint_radius)
    return float(np.mean(f @ weights.as_array()))
