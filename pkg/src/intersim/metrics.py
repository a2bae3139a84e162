"""Post-run evaluation: travel speed, delay, post-encroachment times.

A PET event pairs consecutive cross-stream passages through one conflict
zone: the gap between the leader's disc leaving the zone and the follower's
disc reaching it. Conflicts are binned by the fixed severity thresholds
0.7 s / 1.31 s / 2.25 s.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .engine import SimLog
from .errors import EmptyLog
from .rewards import FOOTPRINT_RADIUS
from .scenario import IntersectionLayout

SEVERITY_BINS = ("serious", "general", "slight", "potential")


@dataclass(frozen=True)
class PetEvent:
    conflict_point: int
    leader: int
    follower: int
    t_leader_exit: float
    t_follower_entry: float
    pet: float


@dataclass
class MetricsSummary:
    avg_travel_speed: float
    total_delay: float
    pet_list: list[float]
    conflict_counts: dict[str, int]
    per_vehicle: dict[int, dict] = field(default_factory=dict)
    n_vehicles: int = 0
    n_exited: int = 0
    deadlock: bool = False
    collisions: int = 0


def average_travel_speed(log: SimLog) -> float:
    """Mean over vehicles of traveled arclength divided by time in network."""
    if not log.vehicles:
        raise EmptyLog("log contains no vehicle records")
    speeds = []
    for vid in sorted(log.vehicles):
        states = log.states_of(vid)
        if states.shape[0] < 2:
            speeds.append(0.0)
            continue
        dist = float(np.sum(np.hypot(np.diff(states[:, 0]), np.diff(states[:, 1]))))
        duration = (states.shape[0] - 1) * log.dt
        speeds.append(dist / duration if duration > 0 else 0.0)
    return float(np.mean(speeds))


def total_delay(log: SimLog) -> float:
    """Sum over vehicles and frames of (1 - v / v_target)+ dt."""
    delay = 0.0
    for row in log.rows:
        v_target = log.vehicles[row.vid].v_target
        if v_target <= 0:
            continue
        delay += max(0.0, 1.0 - row.v / v_target) * log.dt
    return delay


def _zone_passages(log: SimLog, layout: IntersectionLayout, cp_index: int,
                   vehicle_radius: float):
    """(enter_t, exit_t, vid, stream) intervals of disc-zone intersection."""
    cp = layout.conflict_points[cp_index]
    reach = cp.zone_radius + vehicle_radius
    passages = []
    for vid in sorted(log.vehicles):
        rec = log.vehicles[vid]
        if rec.stream not in (cp.stream_a, cp.stream_b):
            continue
        rows = log.rows_of(vid)
        inside = [
            (r.frame, np.hypot(r.x - cp.x, r.y - cp.y) <= reach) for r in rows
        ]
        run_start = None
        prev_frame = None
        for frame, occ in inside:
            if occ and run_start is None:
                run_start = frame
            elif not occ and run_start is not None:
                passages.append((run_start * log.dt, prev_frame * log.dt, vid, rec.stream))
                run_start = None
            prev_frame = frame
        if run_start is not None:
            passages.append((run_start * log.dt, prev_frame * log.dt, vid, rec.stream))
    passages.sort(key=lambda p: (p[0], p[2]))
    return passages


def pet_events(log: SimLog, layout: IntersectionLayout,
               vehicle_radius: float = FOOTPRINT_RADIUS) -> list[PetEvent]:
    """Consecutive cross-stream zone passages, leader exit to follower entry."""
    events: list[PetEvent] = []
    for idx in range(len(layout.conflict_points)):
        passages = _zone_passages(log, layout, idx, vehicle_radius)
        for prev, nxt in zip(passages, passages[1:]):
            if prev[3] == nxt[3]:
                continue  # same-stream pairs are car-following, not conflicts
            if nxt[0] < prev[1]:
                continue  # overlapping occupancy is not a clean passage pair
            events.append(
                PetEvent(
                    conflict_point=idx,
                    leader=prev[2],
                    follower=nxt[2],
                    t_leader_exit=prev[1],
                    t_follower_entry=nxt[0],
                    pet=nxt[0] - prev[1],
                )
            )
    return events


def classify_conflicts(pets: list[float]) -> dict[str, int]:
    """Partition PET values by the fixed severity thresholds."""
    counts = {name: 0 for name in SEVERITY_BINS}
    for pet in pets:
        if pet < 0.0:
            raise ValueError("PET values must be nonnegative")
        if pet < 0.7:
            counts["serious"] += 1
        elif pet < 1.31:
            counts["general"] += 1
        elif pet < 2.25:
            counts["slight"] += 1
        else:
            counts["potential"] += 1
    return counts


def summarize(log: SimLog, layout: IntersectionLayout,
              vehicle_radius: float = FOOTPRINT_RADIUS) -> MetricsSummary:
    events = pet_events(log, layout, vehicle_radius)
    pets = [e.pet for e in events]
    per_vehicle = {}
    for vid in sorted(log.vehicles):
        rec = log.vehicles[vid]
        states = log.states_of(vid)
        dist = (
            float(np.sum(np.hypot(np.diff(states[:, 0]), np.diff(states[:, 1]))))
            if states.shape[0] >= 2
            else 0.0
        )
        per_vehicle[vid] = {
            "class": rec.cls,
            "driver_type": rec.kind,
            "stream": rec.stream,
            "spawn_frame": rec.spawn_frame,
            "exit_frame": rec.exit_frame,
            "distance": dist,
        }
    return MetricsSummary(
        avg_travel_speed=average_travel_speed(log) if log.vehicles else 0.0,
        total_delay=total_delay(log),
        pet_list=pets,
        conflict_counts=classify_conflicts(pets),
        per_vehicle=per_vehicle,
        n_vehicles=len(log.vehicles),
        n_exited=sum(1 for r in log.vehicles.values() if r.exit_frame is not None),
        deadlock=log.deadlock,
        collisions=len(log.collisions),
    )
