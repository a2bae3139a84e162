"""Frame loop: spawning, per-frame decisions, simultaneous commit, monitoring.

Every frame the world is frozen, human-driven vehicles pick their equilibrium
maneuver, autonomous vehicles act through the configured control method, and
all next states commit at once. Disc overlap aborts the run as a collision;
a sustained all-stopped window aborts as a deadlock. Runs are pure functions
of the configuration, seed included.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .baselines import BaselineConfig, batch_controller, fcfs_controller
from .cooperative import CoopConfig, ncl_decide
from .drivers import PRESETS, HvConfig, hv_decide
from .dynamics import VehicleState, normalize_angle, step
from .errors import (
    AllAllocationsInfeasible,
    CollisionDetected,
    DeadlockDetected,
    InvalidConfig,
)
from .rewards import FOOTPRINT_RADIUS
from .scenario import ScenarioConfig, build_intersection
from .world import VehicleInfo, WorldState

METHODS = ("ncl", "cl", "fcfs", "batch")
HV_KINDS = ("aggressive", "normal", "conservative")


@dataclass(frozen=True)
class SimConfig:
    dt: float = 0.1
    frames: int = 1200
    lane_volume: float = 300.0  # veh/h per stream
    rop: float = 1.0  # fraction of arrivals that are CAVs
    hv_composition: tuple[float, float, float] = (0.0, 1.0, 0.0)
    method: str = "ncl"
    seed: int = 0
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    hv: HvConfig = field(default_factory=HvConfig)
    coop: CoopConfig = field(default_factory=CoopConfig)
    baseline: BaselineConfig = field(default_factory=BaselineConfig)
    batch_size_max: int = 4
    min_headway: float = 2.0  # seconds
    spawn_block_radius: float = 8.0  # meters
    vehicle_radius: float = FOOTPRINT_RADIUS
    deadlock_speed: float = 0.05  # m/s
    deadlock_frames: int = 100

    def validate(self) -> None:
        if self.dt <= 0.0:
            raise InvalidConfig("dt must be positive")
        if self.frames < 1:
            raise InvalidConfig("frames must be >= 1")
        if not 0.0 <= self.rop <= 1.0:
            raise InvalidConfig("rop must lie in [0, 1]")
        if abs(sum(self.hv_composition) - 1.0) > 1e-9:
            raise InvalidConfig("hv_composition must sum to 1")
        if self.method not in METHODS:
            raise InvalidConfig(f"method must be one of {METHODS}")
        if self.lane_volume <= 0.0:
            raise InvalidConfig("lane_volume must be positive")


@dataclass(frozen=True)
class Arrival:
    time: float
    cls: str  # "hv" | "cav"
    kind: str  # driver type; CAVs use the normal preset


@dataclass
class VehicleRecord:
    vid: int
    cls: str
    kind: str
    stream: int
    v_target: float
    entry_order: int
    spawn_frame: int
    exit_frame: int | None = None


@dataclass
class LogRow:
    frame: int
    vid: int
    x: float
    y: float
    v: float
    gamma: float
    a: float
    omega: float
    k: int | None


@dataclass
class SimLog:
    dt: float
    rows: list[LogRow] = field(default_factory=list)
    vehicles: dict[int, VehicleRecord] = field(default_factory=dict)
    collisions: list[tuple[int, int, int]] = field(default_factory=list)
    deadlock: bool = False
    frames_run: int = 0
    spawned: int = 0

    def rows_of(self, vid: int) -> list[LogRow]:
        return [r for r in self.rows if r.vid == vid]

    def states_of(self, vid: int) -> np.ndarray:
        return np.array([[r.x, r.y, r.v, r.gamma] for r in self.rows if r.vid == vid])


def spawn_schedule(config: SimConfig) -> dict[int, list[Arrival]]:
    """Per-stream arrivals: shifted-exponential headways, seeded class draws."""
    config.validate()
    mean = 3600.0 / config.lane_volume
    shift = min(config.min_headway, mean)
    duration = config.frames * config.dt
    out: dict[int, list[Arrival]] = {}
    for stream_idx in range(len(config.scenario.streams)):
        rng = np.random.default_rng([config.seed, stream_idx, 0x5EED])
        arrivals = []
        t = 0.0
        while True:
            t += shift + rng.exponential(max(mean - shift, 1e-9))
            if t >= duration:
                break
            if rng.uniform() < config.rop:
                cls, kind = "cav", "normal"
            else:
                u = rng.uniform()
                acc = 0.0
                kind = HV_KINDS[-1]
                for name, frac in zip(HV_KINDS, config.hv_composition):
                    acc += frac
                    if u < acc:
                        kind = name
                        break
                cls = "hv"
            arrivals.append(Arrival(time=t, cls=cls, kind=kind))
        out[stream_idx] = arrivals
    return out


def _derived_action(prev: VehicleState, nxt: VehicleState, dt: float) -> tuple[float, float]:
    a = (nxt.v - prev.v) / dt
    omega = normalize_angle(nxt.gamma - prev.gamma) / dt
    return a, omega


def run(config: SimConfig) -> SimLog:
    """Simulate the configured scenario; raises on collision or deadlock."""
    config.validate()
    layout = build_intersection(config.scenario)
    schedule = spawn_schedule(config)
    pending: dict[int, list[Arrival]] = {k: list(v) for k, v in schedule.items()}
    log = SimLog(dt=config.dt)
    world = WorldState(layout=layout, time=0.0)
    entry_counter = 0
    vid_counter = 0
    stopped_streak = 0

    for frame in range(config.frames):
        now = frame * config.dt
        world.time = now

        # spawn due arrivals, oldest first across streams
        due: list[tuple[float, int]] = []
        for stream_id, queue in pending.items():
            if queue and queue[0].time <= now:
                due.append((queue[0].time, stream_id))
        for _, stream_id in sorted(due):
            arrival = pending[stream_id][0]
            path = layout.stream(stream_id).path
            spawn_xy = path.point_at(0.0)
            blocked = any(
                math.hypot(v.state.x - spawn_xy[0], v.state.y - spawn_xy[1])
                < config.spawn_block_radius
                for v in world.vehicles.values()
            )
            if blocked:
                continue
            pending[stream_id].pop(0)
            profile = PRESETS[arrival.kind]
            heading = float(path.heading_at(0.0))
            state = VehicleState(float(spawn_xy[0]), float(spawn_xy[1]), profile.v_init, heading)
            info = VehicleInfo(
                vid=vid_counter,
                cls=arrival.cls,
                stream=stream_id,
                profile=profile,
                state=state,
                entry_order=entry_counter,
                spawn_time=now,
                s=0.0,
            )
            world.vehicles[vid_counter] = info
            log.vehicles[vid_counter] = VehicleRecord(
                vid=vid_counter,
                cls=arrival.cls,
                kind=arrival.kind,
                stream=stream_id,
                v_target=profile.v_target,
                entry_order=entry_counter,
                spawn_frame=frame,
            )
            log.spawned += 1
            vid_counter += 1
            entry_counter += 1

        # decisions against the frozen frame
        next_states: dict[int, VehicleState] = {}
        k_levels: dict[int, int] = {}
        hv_ids = sorted(v.vid for v in world.vehicles.values() if v.cls == "hv")
        cav_ids = sorted(v.vid for v in world.vehicles.values() if v.cls == "cav")

        game_cache: dict = {}
        for vid in hv_ids:
            action = hv_decide(vid, world, layout, config.dt, config.hv, game_cache)
            next_states[vid] = step(world.vehicles[vid].state, action, config.dt)

        if cav_ids:
            if config.method in ("ncl", "cl"):
                try:
                    decision = ncl_decide(
                        world, layout, config.coop, config.dt, objective=config.method
                    )
                except AllAllocationsInfeasible as exc:
                    log.deadlock = True
                    log.frames_run = frame
                    raise DeadlockDetected(str(exc), log=log) from exc
                next_states.update(decision.next_states)
                k_levels.update(decision.k_by_vehicle)
            else:
                ctrl = (
                    fcfs_controller(world, layout, config.dt, config.baseline)
                    if config.method == "fcfs"
                    else batch_controller(
                        world, layout, config.dt, config.batch_size_max, config.baseline
                    )
                )
                for vid in cav_ids:
                    next_states[vid] = ctrl[vid]

        # record the frozen frame with the realized action
        for vid in sorted(world.vehicles):
            veh = world.vehicles[vid]
            nxt = next_states[vid]
            a, omega = _derived_action(veh.state, nxt, config.dt)
            log.rows.append(
                LogRow(frame, vid, veh.state.x, veh.state.y, veh.state.v, veh.state.gamma,
                       a, omega, k_levels.get(vid))
            )

        # simultaneous commit
        for vid, state in next_states.items():
            veh = world.vehicles[vid]
            veh.state = state
            path = layout.stream(veh.stream).path
            s, _ = path.project_many(state.position.reshape(1, 2))
            veh.s = float(s[0])

        # collision monitoring (disc overlap)
        ids = sorted(world.vehicles)
        for i in range(len(ids)):
            for j in range(i + 1, len(ids)):
                a_v = world.vehicles[ids[i]].state
                b_v = world.vehicles[ids[j]].state
                if math.hypot(a_v.x - b_v.x, a_v.y - b_v.y) < 2.0 * config.vehicle_radius:
                    log.collisions.append((frame, ids[i], ids[j]))
        if log.collisions:
            log.frames_run = frame + 1
            raise CollisionDetected(
                f"footprint overlap at frame {log.collisions[0][0]}", log=log
            )

        # despawn past the path end
        for vid in list(world.vehicles):
            veh = world.vehicles[vid]
            if veh.s >= layout.stream(veh.stream).path.length - 0.25:
                log.vehicles[vid].exit_frame = frame
                del world.vehicles[vid]

        # deadlock monitoring
        if world.vehicles and all(
            v.state.v < config.deadlock_speed for v in world.vehicles.values()
        ):
            stopped_streak += 1
        else:
            stopped_streak = 0
        if stopped_streak >= config.deadlock_frames:
            log.deadlock = True
            log.frames_run = frame + 1
            raise DeadlockDetected(
                f"all vehicles stationary for {config.deadlock_frames} frames", log=log
            )

        log.frames_run = frame + 1

    return log


def config_with(config: SimConfig, **overrides) -> SimConfig:
    """Functional update helper used by the CLI and sweeps."""
    return replace(config, **overrides)
