"""Cooperative CAV control: reasoning-depth allocation over traffic streams.

Every occupied stream receives a depth k in {0, 1, 2}; streams sharing a
conflict point must receive distinct depths. For each feasible allocation the
controller rolls the whole scene out level by level: depth-0 vehicles plan
against frozen snapshots of everyone else, depth-k vehicles plan against the
depth-(k-1) planned trajectories, and in-stream followers always see their
leader's fresh plan. Human-driven vehicles are embedded as constant-speed
path followers. The allocation maximizing the system objective (sum over
vehicles of normalized inverse mean distance-to-go) wins; each CAV commits
the first step of its plan under that allocation.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import Trajectory, VehicleState
from .errors import AllAllocationsInfeasible, NoSolution
from .lattice import PlanRequest, PlannedTrajectory, PlannerObstacle, plan
from .rewards import FOOTPRINT_RADIUS
from .scenario import IntersectionLayout
from .world import WorldState

K_MAX = 2
TURN_EQUIV_SLOPE = 1.44
TURN_EQUIV_OFFSET = 25.4
DBAR_FLOOR = 1.0


@dataclass(frozen=True)
class KAllocation:
    assignment: tuple[tuple[int, int], ...]  # sorted (stream id, k) pairs

    @staticmethod
    def from_dict(d: dict[int, int]) -> "KAllocation":
        return KAllocation(tuple(sorted(d.items())))

    def as_dict(self) -> dict[int, int]:
        return dict(self.assignment)

    def k_of(self, stream_id: int) -> int:
        return self.as_dict()[stream_id]

    def vector(self) -> tuple[int, ...]:
        return tuple(k for _, k in self.assignment)


@dataclass
class ObjectiveReport:
    allocation: KAllocation
    value: float
    per_group_dbar: dict[int, float]
    per_group_value: dict[int, float] = field(default_factory=dict)


@dataclass(frozen=True)
class CoopConfig:
    rollout_horizon: int = 30  # frames; matches the planner's longest sample
    margin: float = 0.3
    zone_buffer: float = 1.8  # seconds between CAV plans inside a shared conflict zone
    radius: float = FOOTPRINT_RADIUS
    go_speed: float = 2.0  # m/s floor for plans crossing the central conflict area


@dataclass
class CoopDecision:
    next_states: dict[int, VehicleState]
    allocation: KAllocation
    k_by_vehicle: dict[int, int]
    report: ObjectiveReport


def logistic_pass_probability(d_turn: float, d_gs: float) -> float:
    """Probability that the going-straight vehicle passes first."""
    if d_turn < 0.0 or d_gs < 0.0:
        raise ValueError("distances must be nonnegative")
    logit = 0.0925 * d_turn - 0.1332 * d_gs + 2.35
    return 1.0 / (1.0 + math.exp(-logit))


def turn_equivalent_distance(dbar: float) -> float:
    """Straight-stream distance standing in for a turning-stream distance."""
    return (dbar + TURN_EQUIV_OFFSET) / TURN_EQUIV_SLOPE


def enumerate_k_allocations(
    occupied: list[int],
    conflict_graph: dict[int, set[int]],
    arrival_time: dict[int, float] | None = None,
) -> list[KAllocation]:
    """All depth maps giving conflicting streams distinct k, else an arrival-ranked fallback."""
    occupied = sorted(occupied)
    if not occupied:
        raise ValueError("need at least one occupied stream")
    out: list[KAllocation] = []
    for combo in itertools.product(range(K_MAX + 1), repeat=len(occupied)):
        ok = True
        for i in range(len(occupied)):
            for j in range(i + 1, len(occupied)):
                if combo[i] == combo[j] and occupied[j] in conflict_graph.get(occupied[i], ()):
                    ok = False
                    break
            if not ok:
                break
        if ok:
            out.append(KAllocation(tuple(zip(occupied, combo))))
    if out:
        return out
    # conflict clique too large for three depths: rank streams by earliest arrival
    if arrival_time is None:
        ranked = occupied
    else:
        ranked = sorted(occupied, key=lambda s: (arrival_time.get(s, math.inf), s))
    assignment = {s: min(rank, K_MAX) for rank, s in enumerate(ranked)}
    return [KAllocation.from_dict(assignment)]


def _hv_prediction(vehicle, layout, horizon, dt) -> PlannedTrajectory:
    """Constant-speed path-following prediction with the lateral offset held."""
    path = layout.stream(vehicle.stream).path
    s0, l0 = path.project_many(vehicle.state.position.reshape(1, 2))
    s0, l0 = float(s0[0]), float(l0[0])
    s = np.minimum(s0 + vehicle.state.v * dt * np.arange(horizon + 1), path.length)
    base = path.point_at(s)
    tang = path.tangent_at(s)
    normal = np.stack([-tang[:, 1], tang[:, 0]], axis=1)
    pos = base + l0 * normal
    heading = np.arctan2(tang[:, 1], tang[:, 0])
    states = np.stack(
        [pos[:, 0], pos[:, 1], np.full(horizon + 1, vehicle.state.v), heading], axis=1
    )
    return PlannedTrajectory(states=states, dt=dt, s=s, l=np.full(horizon + 1, l0))


def _static_trajectory(vehicle, horizon, dt) -> Trajectory:
    row = np.array([vehicle.state.x, vehicle.state.y, 0.0, vehicle.state.gamma])
    return Trajectory(np.tile(row, (horizon + 1, 1)), dt)


def _shared_zones(layout, stream_a, stream_b):
    return tuple(
        (cp.x, cp.y, cp.zone_radius) for cp in layout.conflicts_between(stream_a, stream_b)
    )


def level_k_rollout(
    allocation: KAllocation,
    world: WorldState,
    layout: IntersectionLayout,
    horizon: int,
    dt: float,
    cfg: CoopConfig = CoopConfig(),
    plan_cache: dict | None = None,
    hv_cache: dict | None = None,
) -> dict[int, Trajectory]:
    """Planned trajectory per vehicle under one depth allocation.

    Raises NoSolution tagged with the blocking vehicle id when some CAV has
    no feasible plan; callers score that allocation -inf.
    """
    assign = allocation.as_dict()
    plans: dict[int, Trajectory] = {}
    lower_level_vids: list[int] = []
    for level in range(K_MAX + 1):
        streams_at = sorted(s for s, k in assign.items() if k == level)
        level_vids: list[int] = []
        for stream_id in streams_at:
            vehicles = world.on_stream(stream_id)  # front first
            planned_pred: list[int] = []
            for veh in vehicles:
                if veh.cls == "hv":
                    if hv_cache is not None and veh.vid in hv_cache:
                        plans[veh.vid] = hv_cache[veh.vid]
                    else:
                        pred = _hv_prediction(veh, layout, horizon, dt)
                        plans[veh.vid] = pred
                        if hv_cache is not None:
                            hv_cache[veh.vid] = pred
                else:
                    env_key = (
                        veh.vid,
                        level,
                        tuple(sorted((s, k) for s, k in assign.items() if k < level)),
                    )
                    if plan_cache is not None and env_key in plan_cache:
                        cached = plan_cache[env_key]
                        if isinstance(cached, NoSolution):
                            raise NoSolution(str(cached), vehicle_id=veh.vid)
                        plans[veh.vid] = cached
                    else:
                        if hv_cache is None:
                            hv_cache = {}
                        obstacles = _build_obstacles(
                            veh, world, layout, plans, lower_level_vids, planned_pred,
                            horizon, dt, cfg, hv_cache,
                        )
                        request = PlanRequest(
                            start=veh.state,
                            path=layout.stream(veh.stream).path,
                            obstacles=obstacles,
                            weights=veh.profile.weights,
                            horizon=horizon,
                            dt=dt,
                            margin=cfg.margin,
                            radius=cfg.radius,
                            target_speed=veh.profile.v_target,
                            go_region=(0.0, 0.0, layout.half_box, cfg.go_speed),
                        )
                        try:
                            result = plan(request)
                        except NoSolution as exc:
                            err = NoSolution(str(exc), vehicle_id=veh.vid)
                            if plan_cache is not None:
                                plan_cache[env_key] = err
                            raise err from exc
                        plans[veh.vid] = result
                        if plan_cache is not None:
                            plan_cache[env_key] = result
                planned_pred.append(veh.vid)
                level_vids.append(veh.vid)
        lower_level_vids = level_vids
    return plans


def _build_obstacles(veh, world, layout, plans, lower_level_vids, planned_pred,
                     horizon, dt, cfg, pred_cache) -> list[PlannerObstacle]:
    obstacles = []
    moving = set(lower_level_vids) | set(planned_pred)
    for other in world.ordered():
        if other.vid == veh.vid:
            continue
        is_moving = other.vid in moving
        if is_moving:
            traj = plans[other.vid]
        else:
            traj = _static_trajectory(other, horizon, dt)
        if other.stream == veh.stream:
            zones: tuple = ()
            buffer = 0.0
        else:
            zones = _shared_zones(layout, veh.stream, other.stream)
            buffer = cfg.zone_buffer if (other.cls == "cav" and zones) else 0.0
        zone_traj = None
        if buffer > 0.0 and not is_moving:
            # frozen snapshots never reach the zone: use the path prediction
            zone_traj = pred_cache.get(other.vid)
            if zone_traj is None:
                zone_traj = _hv_prediction(other, layout, horizon, dt)
                pred_cache[other.vid] = zone_traj
        obstacles.append(
            PlannerObstacle(
                trajectory=traj, margin=cfg.margin, zones=zones,
                zone_buffer=buffer, zone_trajectory=zone_traj,
            )
        )
    return obstacles


def _mean_distance_to_go(traj: Trajectory, path) -> float:
    s = getattr(traj, "s", None)
    if s is None:
        s, _ = path.project_many(traj.positions)
    return float(np.mean(path.length - np.asarray(s)))


def _objective(rollouts, world, layout, normalized: bool) -> ObjectiveReport:
    per_dbar: dict[int, list[float]] = {}
    per_value: dict[int, float] = {}
    total = 0.0
    for vid, traj in sorted(rollouts.items()):
        veh = world.vehicles[vid]
        stream = layout.stream(veh.stream)
        dbar = max(DBAR_FLOOR, _mean_distance_to_go(traj, stream.path))
        if normalized and stream.movement != "straight":
            contrib = 1.0 / max(DBAR_FLOOR, turn_equivalent_distance(dbar))
        else:
            contrib = 1.0 / dbar
        per_dbar.setdefault(veh.stream, []).append(dbar)
        per_value[veh.stream] = per_value.get(veh.stream, 0.0) + contrib
        total += contrib
    report = ObjectiveReport(
        allocation=KAllocation(()),
        value=total,
        per_group_dbar={s: float(np.mean(v)) for s, v in per_dbar.items()},
        per_group_value=per_value,
    )
    return report


def normalized_objective(rollouts: dict[int, Trajectory], world: WorldState,
                         layout: IntersectionLayout) -> ObjectiveReport:
    """System objective with turning streams mapped to equivalent straight distances."""
    return _objective(rollouts, world, layout, normalized=True)


def cl_objective(rollouts: dict[int, Trajectory], world: WorldState,
                 layout: IntersectionLayout) -> ObjectiveReport:
    """Plain inverse-distance objective (no turning normalization)."""
    return _objective(rollouts, world, layout, normalized=False)


def ncl_decide(
    world: WorldState,
    layout: IntersectionLayout,
    cfg: CoopConfig = CoopConfig(),
    dt: float = 0.1,
    objective: str = "ncl",
) -> CoopDecision:
    """Enumerate allocations, score each by level-k rollout, commit the best plans."""
    cavs = [v for v in world.ordered() if v.cls == "cav"]
    if not cavs:
        raise ValueError("ncl_decide requires at least one CAV")
    occupied = world.occupied_streams()
    arrival = {}
    for v in world.ordered():
        arrival[v.stream] = min(arrival.get(v.stream, math.inf), v.spawn_time)
    allocations = enumerate_k_allocations(occupied, layout.conflict_graph(), arrival)
    score_fn = normalized_objective if objective == "ncl" else cl_objective

    plan_cache: dict = {}
    hv_cache: dict = {}
    best = None
    for alloc in allocations:
        try:
            rollouts = level_k_rollout(
                alloc, world, layout, cfg.rollout_horizon, dt, cfg, plan_cache, hv_cache
            )
        except NoSolution:
            continue
        report = score_fn(rollouts, world, layout)
        report.allocation = alloc
        key = (-report.value, alloc.vector())
        if best is None or key < best[0]:
            best = (key, alloc, rollouts, report)
    if best is None:
        raise AllAllocationsInfeasible("every k-allocation left some CAV without a plan")

    _, alloc, rollouts, report = best
    assign = alloc.as_dict()
    next_states = {c.vid: rollouts[c.vid].state(1) for c in cavs}
    k_by_vehicle = {c.vid: assign[c.stream] for c in cavs}
    return CoopDecision(next_states, alloc, k_by_vehicle, report)
