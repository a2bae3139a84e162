"""Reservation-based controllers: first-come-first-served and batch service.

Both controllers keep vehicles locked to their reference paths and act only
through the discrete longitudinal maneuvers (0, +-2, -4 m/s^2). A vehicle is
blocked while any conflicting vehicle holding an earlier reservation has not
yet cleared the shared conflict zone; blocked vehicles stop a fixed offset
before the zone. The batch variant groups consecutive same-stream arrivals
and serves whole batches under the leader's entry order.
"""

from __future__ import annotations

from dataclasses import dataclass

from .dynamics import VehicleState, normalize_angle
from .rewards import FOOTPRINT_RADIUS
from .scenario import IntersectionLayout
from .world import WorldState

BRAKE = -4.0
DECEL = -2.0
MAINTAIN = 0.0
ACCEL = 2.0


@dataclass(frozen=True)
class Reservation:
    vehicle_id: int
    entry_order: int
    batch_id: int | None
    granted: bool


@dataclass(frozen=True)
class BaselineConfig:
    stop_offset: float = 3.0  # meters short of the conflict zone edge
    follow_gap: float = 2.0  # clearance beyond two footprint radii
    batch_gap: float = 4.0  # max headway (s) joining a batch
    radius: float = FOOTPRINT_RADIUS


def _batch_rows(world: WorldState, batch_size_max: int, cfg: BaselineConfig):
    """Per-vehicle priority row plus batch ids (leader entry order rules the batch)."""
    rows: dict[int, int] = {}
    batch_ids: dict[int, int] = {}
    next_batch = 0
    for stream_id in world.occupied_streams():
        members = sorted(
            (v for v in world.vehicles.values() if v.stream == stream_id),
            key=lambda v: v.entry_order,
        )
        current: list = []
        for v in members:
            if (
                current
                and len(current) < batch_size_max
                and v.spawn_time - current[-1].spawn_time <= cfg.batch_gap
            ):
                current.append(v)
            else:
                if current:
                    _flush_batch(current, rows, batch_ids, next_batch)
                    next_batch += 1
                current = [v]
        if current:
            _flush_batch(current, rows, batch_ids, next_batch)
            next_batch += 1
    return rows, batch_ids


def _flush_batch(members, rows, batch_ids, batch_id):
    row = min(m.entry_order for m in members)
    for m in members:
        rows[m.vid] = row
        batch_ids[m.vid] = batch_id


def _conflict_stop_distance(ego, world, layout, rows, cfg) -> float | None:
    """Distance to the nearest binding stop line, None when unblocked."""
    d_stop = None
    for cp in layout.conflicts_of(ego.stream):
        if cp.stream_a == ego.stream:
            ego_arc, other_arc, other_stream = cp.arc_pos_a, cp.arc_pos_b, cp.stream_b
        else:
            ego_arc, other_arc, other_stream = cp.arc_pos_b, cp.arc_pos_a, cp.stream_a
        if ego.s > ego_arc + cp.zone_radius + cfg.radius:
            continue  # ego already cleared this zone
        for other in world.vehicles.values():
            if other.stream != other_stream:
                continue
            if rows[other.vid] >= rows[ego.vid]:
                continue
            if other.s > other_arc + cp.zone_radius + cfg.radius:
                continue  # earlier vehicle is already past
            line = ego_arc - cp.zone_radius - cfg.stop_offset - ego.s
            d_stop = line if d_stop is None else min(d_stop, line)
            break
    return d_stop


def _follow_stop_distance(ego, world, cfg) -> float | None:
    pred = world.predecessor_of(ego.vid)
    if pred is None:
        return None
    return pred.s - (2.0 * cfg.radius + cfg.follow_gap) - ego.s


def _pick_accel(v: float, d_stop: float | None, v_target: float, dt: float) -> float:
    """Mildest discrete maneuver that keeps the vehicle able to stop in d_stop."""
    if d_stop is None:
        return ACCEL if v < v_target - 1e-9 else MAINTAIN
    for a in (MAINTAIN, DECEL, BRAKE):
        v1 = max(0.0, v + a * dt)
        if v * dt + v1 * v1 / (2.0 * abs(BRAKE)) <= d_stop + 1e-9:
            return a
    return BRAKE


def _advance_on_path(path, s: float, v: float, a: float, dt: float):
    s_next = min(s + v * dt, path.length)
    v_next = max(0.0, v + a * dt)
    p = path.point_at(s_next)
    heading = float(path.heading_at(s_next))
    return VehicleState(float(p[0]), float(p[1]), v_next, normalize_angle(heading)), s_next


def _reservation_step(world, layout, dt, rows, cfg) -> dict[int, VehicleState]:
    out: dict[int, VehicleState] = {}
    for ego in world.ordered():
        path = layout.stream(ego.stream).path
        stops = []
        d_conflict = _conflict_stop_distance(ego, world, layout, rows, cfg)
        if d_conflict is not None:
            stops.append(d_conflict)
        d_follow = _follow_stop_distance(ego, world, cfg)
        if d_follow is not None:
            stops.append(d_follow)
        d_stop = min(stops) if stops else None
        a = _pick_accel(ego.state.v, d_stop, ego.profile.v_target, dt)
        out[ego.vid], _ = _advance_on_path(path, ego.s, ego.state.v, a, dt)
    return out


def fcfs_controller(
    world: WorldState, layout: IntersectionLayout, dt: float, cfg: BaselineConfig = BaselineConfig()
) -> dict[int, VehicleState]:
    """Right of way strictly by network entry order."""
    rows = {v.vid: v.entry_order for v in world.vehicles.values()}
    return _reservation_step(world, layout, dt, rows, cfg)


def batch_controller(
    world: WorldState,
    layout: IntersectionLayout,
    dt: float,
    batch_size_max: int = 4,
    cfg: BaselineConfig = BaselineConfig(),
) -> dict[int, VehicleState]:
    """FCFS over batches of consecutive same-stream arrivals."""
    if batch_size_max < 1:
        raise ValueError("batch_size_max must be >= 1")
    rows, _ = _batch_rows(world, batch_size_max, cfg)
    return _reservation_step(world, layout, dt, rows, cfg)


def batch_reservations(
    world: WorldState,
    layout: IntersectionLayout,
    batch_size_max: int = 4,
    cfg: BaselineConfig = BaselineConfig(),
) -> list[Reservation]:
    """Current reservation table (granted = not blocked this frame)."""
    rows, batch_ids = _batch_rows(world, batch_size_max, cfg)
    out = []
    for v in world.ordered():
        blocked = _conflict_stop_distance(v, world, layout, rows, cfg) is not None
        out.append(Reservation(v.vid, v.entry_order, batch_ids[v.vid], not blocked))
    return out
