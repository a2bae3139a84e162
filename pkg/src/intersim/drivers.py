"""Heterogeneous human-driver model: per-frame non-cooperative games.

Each frame an HV gathers the vehicles it is in conflict with, builds a
normal-form game over the discrete maneuver set, and plays its component of
the pure Nash equilibrium. Payoffs are horizon rewards: every player holds a
candidate maneuver for a short rollout and scores the mean per-frame feature
reward under its own preference weights. Interacting vehicles construct the
game over the same canonically-ordered player list, so they select consistent
equilibria.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import ACTION_ACCELERATE, Action, action_set, rollout_all_actions
from .games import NashResult, game_from_table, pure_nash
from .rewards import FOOTPRINT_RADIUS, RewardWeights, inverse_ttc, ttc_array
from .scenario import IntersectionLayout
from .world import WorldState


@dataclass(frozen=True)
class DriverProfile:
    kind: str  # aggressive | normal | conservative
    weights: RewardWeights
    v_init: float
    v_target: float


PRESETS: dict[str, DriverProfile] = {
    "aggressive": DriverProfile("aggressive", RewardWeights(8.33, 1.56, 3.69), 6.29, 6.98),
    "normal": DriverProfile("normal", RewardWeights(8.2, 1.72, 5.7), 3.31, 4.42),
    "conservative": DriverProfile("conservative", RewardWeights(7.79, 2.1, 8.44), 1.34, 1.60),
}


@dataclass(frozen=True)
class HvConfig:
    interaction_radius: float = 30.0  # meters to a shared conflict point
    max_opponents: int = 2
    horizon: int = 10  # frames each candidate maneuver is held
    footprint_radius: float = FOOTPRINT_RADIUS
    pass_slack: float = 3.5  # a conflict this far behind a vehicle no longer binds


def interaction_set(
    ego_id: int, world: WorldState, layout: IntersectionLayout, cfg: HvConfig = HvConfig()
) -> list[int]:
    """Vehicles the ego currently games with: conflict-sharing plus the leader."""
    ego = world.vehicles[ego_id]
    candidates: dict[int, float] = {}

    for cp in layout.conflicts_of(ego.stream):
        if cp.stream_a == ego.stream:
            ego_arc, other_arc, other_stream = cp.arc_pos_a, cp.arc_pos_b, cp.stream_b
        else:
            ego_arc, other_arc, other_stream = cp.arc_pos_b, cp.arc_pos_a, cp.stream_a
        if ego.s > ego_arc + cfg.pass_slack:
            continue  # ego already cleared this crossing
        for v in world.vehicles.values():
            if v.vid == ego_id or v.stream != other_stream:
                continue
            remaining = other_arc - v.s
            if remaining <= -cfg.pass_slack or remaining >= cfg.interaction_radius:
                continue
            dist = max(remaining, 0.0)
            if v.vid not in candidates or dist < candidates[v.vid]:
                candidates[v.vid] = dist

    pred = world.predecessor_of(ego_id)
    if pred is not None:
        gap = pred.s - ego.s
        if gap < cfg.interaction_radius:
            if pred.vid not in candidates or gap < candidates[pred.vid]:
                candidates[pred.vid] = gap

    ranked = sorted(candidates.items(), key=lambda kv: (kv[1], kv[0]))
    return [vid for vid, _ in ranked[: cfg.max_opponents]]


def _allowed_actions(vehicle) -> list[int]:
    idx = list(range(6))
    if vehicle.state.v >= vehicle.profile.v_target - 1e-9:
        idx.remove(ACTION_ACCELERATE)
    return idx


def _player_rollouts(vehicle, allowed, horizon, dt, layout):
    """Rollouts for one player's allowed actions plus own-path feature parts."""
    states = rollout_all_actions(vehicle.state, horizon, dt)[allowed]  # (na, H+1, 4)
    path = layout.stream(vehicle.stream).path
    na, nf, _ = states.shape
    flat = states.reshape(-1, 4)
    s, l = path.project_many(flat[:, :2])
    d = (path.length - s).reshape(na, nf)
    o = np.abs(l).reshape(na, nf)
    own_part = -(d.mean(axis=1)) * vehicle.profile.weights.w_eff - (
        o.mean(axis=1)
    ) * vehicle.profile.weights.w_comf
    pos = states[:, :, :2]
    vel = states[:, :, 2:3] * np.stack([np.cos(states[:, :, 3]), np.sin(states[:, :, 3])], axis=2)
    return states, pos, vel, own_part


def _joint_payoff_table(players, world, layout, dt, cfg: HvConfig):
    """Dense payoff table over joint maneuver profiles for <= 3 players."""
    n = len(players)
    infos = [world.vehicles[vid] for vid in players]
    allowed = [_allowed_actions(v) for v in infos]
    rolls = [
        _player_rollouts(v, a, cfg.horizon, dt, layout) for v, a in zip(infos, allowed)
    ]
    shape = tuple(len(a) for a in allowed)
    contact = 2.0 * cfg.footprint_radius

    # pairwise per-frame inverse TTC grids
    inv = {}
    for i in range(n):
        for j in range(i + 1, n):
            rel_p = rolls[j][1][None, :, :, :] - rolls[i][1][:, None, :, :]
            rel_v = rolls[j][2][None, :, :, :] - rolls[i][2][:, None, :, :]
            inv[(i, j)] = inverse_ttc(ttc_array(rel_p, rel_v, contact))  # (ni, nj, H+1)

    table = np.zeros(shape + (n,), dtype=float)
    nf = cfg.horizon + 1
    for p in range(n):
        w = infos[p].profile.weights
        own = rolls[p][3]  # (np,)
        own_shape = [1] * n
        own_shape[p] = shape[p]
        payoff = np.broadcast_to(own.reshape(own_shape), shape).copy()
        if n > 1:
            worst = np.zeros(shape + (nf,), dtype=float)
            for q in range(n):
                if q == p:
                    continue
                i, j = (p, q) if p < q else (q, p)
                # grid axes already ordered (i, j, frame) with i < j, matching
                # their positions in the joint table, so a reshape suffices
                worst = np.maximum(worst, inv[(i, j)].reshape(_placed(shape, i, j, nf)))
            payoff = payoff - w.w_safe * worst.mean(axis=-1)
        table[..., p] = payoff
    return table, allowed


def _placed(shape, i, j, nf):
    """Target shape embedding a (n_i, n_j, frames) grid into the joint table axes."""
    out = [1] * len(shape) + [nf]
    out[i] = shape[i]
    out[j] = shape[j]
    return tuple(out)


def solve_interaction_game(
    players: list[int], world: WorldState, layout: IntersectionLayout, dt: float, cfg: HvConfig
) -> tuple[NashResult, list[list[int]]]:
    table, allowed = _joint_payoff_table(players, world, layout, dt, cfg)
    return pure_nash(game_from_table(table)), allowed


def hv_decide(
    ego_id: int,
    world: WorldState,
    layout: IntersectionLayout,
    dt: float,
    cfg: HvConfig = HvConfig(),
    game_cache: dict | None = None,
) -> Action:
    """Equilibrium maneuver of one human-driven vehicle for this frame."""
    opponents = interaction_set(ego_id, world, layout, cfg)
    players = sorted([ego_id] + opponents)
    key = tuple(players)
    if game_cache is not None and key in game_cache:
        result, allowed = game_cache[key]
    else:
        result, allowed = solve_interaction_game(players, world, layout, dt, cfg)
        if game_cache is not None:
            game_cache[key] = (result, allowed)
    slot = players.index(ego_id)
    action_idx = allowed[slot][result.profile[slot]]
    return action_set()[action_idx]
