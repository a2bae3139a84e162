"""Lattice trajectory planner: Frenet sampling plus quartic lateral polynomials.

Candidates combine three planning horizons, three longitudinal endpoint
factors, and three lateral endpoint offsets (27 in the initial grid). Each
candidate follows a constant-acceleration longitudinal profile (clipped to
the +-4 m/s^2 actuation envelope, speed floored at zero) and a quartic
lateral polynomial in arclength meeting the endpoint with zero slope and
curvature. On an empty grid the sampling space is enlarged once; a second
failure raises NoSolution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import Trajectory, VehicleState, normalize_angle
from .errors import NoSolution
from .rewards import FOOTPRINT_RADIUS, RewardWeights, inverse_ttc, ttc_array
from .scenario import ReferencePath

INITIAL_FACTORS = (0.4, 0.7, 1.0)
INITIAL_LATERALS = (-1.0, 0.0, 1.0)
ENLARGED_FACTORS = tuple(np.round(np.arange(0.1, 1.21, 0.15), 3))
ENLARGED_LATERALS = tuple(np.round(np.arange(-2.5, 2.51, 0.5), 3))
MAX_ACCEL = 4.0


@dataclass(frozen=True)
class FrenetState:
    s: float
    s_dot: float
    l: float
    l_prime: float


@dataclass
class PlannerObstacle:
    """Obstacle prediction plus the clearance rules the planner applies to it."""

    trajectory: Trajectory
    margin: float
    zones: tuple = ()  # (x, y, radius) conflict zones shared with the ego path
    zone_buffer: float = 0.0  # seconds of temporal separation inside shared zones
    # motion model for the zone check when `trajectory` is a frozen snapshot;
    # a frozen crosser otherwise never "occupies" the zone until too late
    zone_trajectory: Trajectory | None = None


@dataclass
class PlanRequest:
    start: VehicleState
    path: ReferencePath
    obstacles: list
    weights: RewardWeights
    horizon: int  # frames; the longest sampled candidate
    dt: float
    margin: float = 0.3
    radius: float = FOOTPRINT_RADIUS
    target_speed: float | None = None
    # (cx, cy, half_size, v_min): candidates crossing into this square must
    # keep v >= v_min inside it, so nobody plans to dawdle in the conflict area
    go_region: tuple | None = None

    def __post_init__(self):
        if self.horizon < 1 or self.margin < 0.0:
            raise ValueError("horizon must be >= 1 and margin nonnegative")


@dataclass
class PlannedTrajectory(Trajectory):
    s: np.ndarray | None = None
    l: np.ndarray | None = None


def cartesian_to_frenet(state: VehicleState, path: ReferencePath) -> FrenetState:
    s, l = path.project_many(state.position.reshape(1, 2))
    s0 = float(s[0])
    heading = float(path.heading_at(np.asarray(s0)))
    dg = normalize_angle(state.gamma - heading)
    dg = max(-1.2, min(1.2, dg))  # keep tan() sane for near-perpendicular poses
    return FrenetState(s=s0, s_dot=state.v * math.cos(dg), l=float(l[0]), l_prime=math.tan(dg))


def frenet_to_cartesian(fstate: FrenetState, path: ReferencePath) -> VehicleState:
    p = path.point_at(fstate.s)
    t = path.tangent_at(np.asarray(fstate.s))
    normal = np.array([-t[1], t[0]])
    pos = p + fstate.l * normal
    dg = math.atan(fstate.l_prime)
    heading = normalize_angle(math.atan2(t[1], t[0]) + dg)
    v = fstate.s_dot * math.sqrt(1.0 + fstate.l_prime**2)
    return VehicleState(float(pos[0]), float(pos[1]), v, heading)


def fit_polynomial(start: FrenetState, end: FrenetState, arc_span: float) -> np.ndarray:
    """Quartic l(sigma) matching l, l' at sigma=0 and l, l'=0, l''=0 at arc_span.

    Returns coefficients lowest order first.
    """
    if arc_span <= 0.0:
        raise ValueError("arc span must be positive")
    S = arc_span
    A = np.array(
        [
            [1.0, 0.0, 0.0, 0.0, 0.0],
            [0.0, 1.0, 0.0, 0.0, 0.0],
            [1.0, S, S**2, S**3, S**4],
            [0.0, 1.0, 2 * S, 3 * S**2, 4 * S**3],
            [0.0, 0.0, 2.0, 6 * S, 12 * S**2],
        ]
    )
    b = np.array([start.l, start.l_prime, end.l, 0.0, 0.0])
    return np.linalg.solve(A, b)


def _eval_poly(coeffs: np.ndarray, sigma: np.ndarray) -> np.ndarray:
    out = np.zeros_like(sigma)
    for c in coeffs[::-1]:
        out = out * sigma + c
    return out


def _longitudinal_series(v0: float, accel: float, accel_frames: int, frames: int,
                         dt: float, s0: float, s_max: float):
    """Forward-Euler arclength/speed series matching the vehicle-model ordering.

    Constant acceleration for `accel_frames`, then constant speed out to
    `frames` so every candidate spans the full planning horizon.
    """
    s = np.empty(frames + 1)
    v = np.empty(frames + 1)
    s[0], v[0] = s0, v0
    for k in range(frames):
        s[k + 1] = min(s_max, s[k] + v[k] * dt)
        a = accel if k < accel_frames else 0.0
        v[k + 1] = max(0.0, v[k] + a * dt)
    return s, v


def _make_candidate(request: PlanRequest, fstart: FrenetState, accel_frames: int,
                    dist_target: float, lat_end: float) -> PlannedTrajectory | None:
    path = request.path
    dt = request.dt
    frames = request.horizon
    T = accel_frames * dt
    v0 = max(0.0, fstart.s_dot)
    accel = 2.0 * (dist_target - v0 * T) / (T * T)
    accel = max(-MAX_ACCEL, min(MAX_ACCEL, accel))
    s, v_lon = _longitudinal_series(v0, accel, accel_frames, frames, dt, fstart.s, path.length)
    span = s[min(accel_frames, frames)] - s[0]
    total_span = s[-1] - s[0]
    if span > 0.05:
        coeffs = fit_polynomial(fstart, FrenetState(s[0] + span, 0.0, lat_end, 0.0), span)
        sigma = np.minimum(s - s[0], span)
        l = _eval_poly(coeffs, sigma)
    elif total_span > 0.05:
        coeffs = fit_polynomial(fstart, FrenetState(s[-1], 0.0, lat_end, 0.0), total_span)
        l = _eval_poly(coeffs, s - s[0])
    else:
        l = np.full(frames + 1, fstart.l)

    base = path.point_at(s)
    tang = path.tangent_at(s)
    normal = np.stack([-tang[:, 1], tang[:, 0]], axis=1)
    pos = base + l[:, None] * normal

    disp = np.diff(pos, axis=0)
    chord = np.hypot(disp[:, 0], disp[:, 1])
    v_cart = np.concatenate([chord / dt, [chord[-1] / dt if frames else 0.0]])
    heading = np.empty(frames + 1)
    moving = chord > 1e-9
    ang = np.arctan2(disp[:, 1], disp[:, 0])
    prev = request.start.gamma
    for k in range(frames):
        if moving[k]:
            prev = ang[k]
        heading[k] = prev
    heading[frames] = prev

    # actuation envelope check, ignoring frames pinned at the path end
    free = s < path.length - 1e-9
    dv = np.abs(np.diff(v_cart))
    check = free[:-1] & free[1:]
    if np.any(dv[check] > MAX_ACCEL * dt + 1e-6):
        return None

    states = np.stack([pos[:, 0], pos[:, 1], v_cart, heading], axis=1)
    return PlannedTrajectory(states=states, dt=dt, s=s, l=l)


def sample_candidates(request: PlanRequest, enlarged: bool = False) -> list[PlannedTrajectory]:
    """Cartesian-endpoint candidate grid (27 initial; wider when enlarged)."""
    fstart = cartesian_to_frenet(request.start, request.path)
    v0 = max(0.0, fstart.s_dot)
    v_ref = max(v0, request.target_speed or 0.0)
    factors = ENLARGED_FACTORS if enlarged else INITIAL_FACTORS
    laterals = ENLARGED_LATERALS if enlarged else INITIAL_LATERALS
    horizons = sorted({max(1, round(request.horizon * f)) for f in (1 / 3, 2 / 3, 1.0)})
    creep_distances = (0.5, 1.0, 2.0)

    out: list[PlannedTrajectory] = []
    for accel_frames in horizons:
        T = accel_frames * request.dt
        for ci, c in enumerate(factors):
            if v_ref < 0.05:
                # degenerate standstill: creep samples so stop lines stay escapable
                dist = creep_distances[min(ci, len(creep_distances) - 1)]
            else:
                dist = v_ref * T * c
            # the arclength series clamps at the path end; leaving `dist` uncapped
            # keeps vehicles from braking pointlessly as they run off the path
            for lat in laterals:
                cand = _make_candidate(request, fstart, accel_frames, dist, lat)
                if cand is not None:
                    out.append(cand)
    if enlarged:
        stop = _full_stop_candidate(request, fstart)
        if stop is not None:
            out.append(stop)
    return out


def _full_stop_candidate(request: PlanRequest, fstart: FrenetState) -> PlannedTrajectory | None:
    v0 = max(0.0, fstart.s_dot)
    if v0 < 1e-9:
        return _make_candidate(request, fstart, request.horizon, 0.0, fstart.l)
    stop_frames = max(1, int(math.ceil(v0 / (MAX_ACCEL * request.dt))))
    dist = v0 * v0 / (2.0 * MAX_ACCEL)  # strongest braking until standstill
    return _make_candidate(request, fstart, min(stop_frames, request.horizon), dist, fstart.l)


def _as_obstacle(entry, default_margin: float) -> PlannerObstacle:
    if isinstance(entry, PlannerObstacle):
        return entry
    return PlannerObstacle(trajectory=entry, margin=default_margin)


def _obstacle_states(traj: Trajectory, frames: int) -> np.ndarray:
    """Obstacle states over frames 0..frames, constant-velocity past the end."""
    n = len(traj)
    if n >= frames + 1:
        return traj.states[: frames + 1]
    out = np.empty((frames + 1, 4))
    out[:n] = traj.states
    last = traj.states[-1]
    vx = last[2] * math.cos(last[3])
    vy = last[2] * math.sin(last[3])
    extra = np.arange(1, frames + 2 - n) * traj.dt
    out[n:, 0] = last[0] + vx * extra
    out[n:, 1] = last[1] + vy * extra
    out[n:, 2] = last[2]
    out[n:, 3] = last[3]
    return out


def collision_free(candidate: Trajectory, obstacles: list, radius: float, margin: float) -> bool:
    """True iff the candidate keeps 2*radius + margin from every obstacle at every frame."""
    n = len(candidate) - 1
    pos = candidate.positions
    for entry in obstacles:
        obs = _as_obstacle(entry, margin)
        states = _obstacle_states(obs.trajectory, n)
        d = np.hypot(states[:, 0] - pos[:, 0], states[:, 1] - pos[:, 1])
        if np.any(d < 2.0 * radius + margin - 1e-9):
            return False
    return True


def _brake_tail(candidate: PlannedTrajectory, dt: float) -> np.ndarray:
    """Straight-line max-braking continuation of the candidate's terminal state.

    Feasibility is checked on candidate + tail so the chosen plan always keeps
    an executable emergency stop; without this, reward pressure walks vehicles
    past the point where braking can still honor a blocked conflict zone.
    """
    x, y, v, heading = candidate.states[-1]
    if v <= 1e-9:
        return np.empty((0, 2))
    frames = int(math.ceil(v / (MAX_ACCEL * dt)))
    out = np.empty((frames, 2))
    cx, cy, cv = x, y, v
    ux, uy = math.cos(heading), math.sin(heading)
    for k in range(frames):
        cx += cv * dt * ux
        cy += cv * dt * uy
        cv = max(0.0, cv - MAX_ACCEL * dt)
        out[k] = (cx, cy)
    return out


def _violates_go_region(candidate: PlannedTrajectory, region: tuple) -> bool:
    cx, cy, half, v_min = region
    pos = candidate.positions
    inside = (np.abs(pos[:, 0] - cx) <= half) & (np.abs(pos[:, 1] - cy) <= half)
    if inside[0] or not inside.any():
        return False  # escape from inside is always allowed
    v = candidate.speeds
    if np.any(inside & (v < v_min)):
        return True
    return bool(inside[-1] and v[-1] < v_min)


def _feasible(candidate: PlannedTrajectory, obstacles: list[PlannerObstacle],
              request: PlanRequest) -> bool:
    """Feasibility used for selection: frame 0 is the uncontrollable present."""
    dt = request.dt
    if request.go_region is not None and _violates_go_region(candidate, request.go_region):
        return False
    tail = _brake_tail(candidate, dt)
    pos = np.concatenate([candidate.positions, tail], axis=0)
    n = pos.shape[0] - 1
    for obs in obstacles:
        states = _obstacle_states(obs.trajectory, n)
        d = np.hypot(states[:, 0] - pos[:, 0], states[:, 1] - pos[:, 1])
        if np.any(d[1:] < 2.0 * request.radius + obs.margin - 1e-9):
            return False
        if obs.zone_buffer > 0.0 and obs.zones:
            window = int(math.ceil(obs.zone_buffer / dt))
            zone_src = obs.zone_trajectory if obs.zone_trajectory is not None else obs.trajectory
            zone_states = (
                states if zone_src is obs.trajectory else _obstacle_states(zone_src, n)
            )
            for zx, zy, zr in obs.zones:
                reach = zr + request.radius
                cand_in = np.hypot(pos[:, 0] - zx, pos[:, 1] - zy) <= reach
                if cand_in[0]:
                    # already inside: the exclusion gates entry, never escape
                    leave = np.flatnonzero(~cand_in)
                    if leave.size == 0:
                        continue
                    cand_in = cand_in.copy()
                    cand_in[: leave[0]] = False
                if not cand_in.any():
                    continue
                obs_in = np.hypot(zone_states[:, 0] - zx, zone_states[:, 1] - zy) <= reach
                if not obs_in.any():
                    continue
                conv = np.convolve(obs_in.astype(float), np.ones(2 * window + 1), "full")
                dilated = conv[window : window + obs_in.size] > 0
                if np.any(cand_in & dilated):
                    return False
    return True


def _candidate_reward(candidate: PlannedTrajectory, obstacles: list[PlannerObstacle],
                      request: PlanRequest) -> float:
    n = len(candidate) - 1
    L = request.path.length
    f_eff = -(L - candidate.s)
    f_comf = -np.abs(candidate.l)
    if obstacles:
        pos = candidate.positions
        vel = candidate.states[:, 2:3] * np.stack(
            [np.cos(candidate.states[:, 3]), np.sin(candidate.states[:, 3])], axis=1
        )
        worst = np.zeros(n + 1)
        for obs in obstacles:
            states = _obstacle_states(obs.trajectory, n)
            ovel = states[:, 2:3] * np.stack([np.cos(states[:, 3]), np.sin(states[:, 3])], axis=1)
            ttc = ttc_array(states[:, :2] - pos, ovel - vel, 2.0 * request.radius)
            worst = np.maximum(worst, inverse_ttc(ttc))
        f_safe = -worst
    else:
        f_safe = np.zeros(n + 1)
    w = request.weights
    per_frame = w.w_eff * f_eff + w.w_comf * f_comf + w.w_safe * f_safe
    return float(per_frame.mean())


def plan(request: PlanRequest) -> PlannedTrajectory:
    """Best feasible candidate by horizon-averaged reward; one enlargement retry."""
    obstacles = [_as_obstacle(e, request.margin) for e in request.obstacles]
    for enlarged in (False, True):
        candidates = sample_candidates(request, enlarged=enlarged)
        best = None
        best_reward = -math.inf
        for cand in candidates:
            if not _feasible(cand, obstacles, request):
                continue
            r = _candidate_reward(cand, obstacles, request)
            if r > best_reward:
                best, best_reward = cand, r
        if best is not None:
            return best
    raise NoSolution("no collision-free trajectory after sampling enlargement")
