"""Intersection geometry: approaches, traffic streams, reference paths, conflict points.

A four-approach unsignalized intersection centred on the origin. Approach
indices are fixed: 0 enters from the south heading north, 1 from the west
heading east, 2 from the north heading south, 3 from the east heading west.
Right-hand traffic; each approach carries at most two streams on separate
lanes. Turn connectors are circular arcs tangent to the entry and exit lane
centerlines. All paths are resampled to fine polylines so projection and
conflict detection stay purely piecewise-linear.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidConfig

MOVEMENTS = ("straight", "left", "right")

# unit heading of each approach and its "right side" vector
_HEADINGS = (
    np.array([0.0, 1.0]),
    np.array([1.0, 0.0]),
    np.array([0.0, -1.0]),
    np.array([-1.0, 0.0]),
)


def _right_of(h: np.ndarray) -> np.ndarray:
    return np.array([h[1], -h[0]])


def _left_of(h: np.ndarray) -> np.ndarray:
    return np.array([-h[1], h[0]])


class ReferencePath:
    """Polyline with cumulative arclength; spacing <= the resample step."""

    def __init__(self, points: np.ndarray):
        pts = np.asarray(points, dtype=float)
        if pts.ndim != 2 or pts.shape[0] < 2 or pts.shape[1] != 2:
            raise InvalidConfig("reference path needs at least two planar points")
        seg = np.diff(pts, axis=0)
        seg_len = np.hypot(seg[:, 0], seg[:, 1])
        if np.any(seg_len <= 1e-12):
            keep = np.concatenate(([True], seg_len > 1e-12))
            pts = pts[keep]
            seg = np.diff(pts, axis=0)
            seg_len = np.hypot(seg[:, 0], seg[:, 1])
        self.points = pts
        self._seg = seg
        self._seg_len = seg_len
        self._seg_dir = seg / seg_len[:, None]
        self.cumulative_arclength = np.concatenate(([0.0], np.cumsum(seg_len)))

    @property
    def length(self) -> float:
        return float(self.cumulative_arclength[-1])

    def point_at(self, s) -> np.ndarray:
        """Cartesian point at arclength s (clamped to [0, length])."""
        s = np.clip(np.asarray(s, dtype=float), 0.0, self.length)
        x = np.interp(s, self.cumulative_arclength, self.points[:, 0])
        y = np.interp(s, self.cumulative_arclength, self.points[:, 1])
        return np.stack([x, y], axis=-1)

    def tangent_at(self, s) -> np.ndarray:
        """Unit tangent of the segment containing arclength s."""
        s = np.asarray(s, dtype=float)
        idx = np.clip(
            np.searchsorted(self.cumulative_arclength, s, side="right") - 1,
            0,
            len(self._seg_len) - 1,
        )
        return self._seg_dir[idx]

    def heading_at(self, s) -> np.ndarray:
        t = self.tangent_at(s)
        return np.arctan2(t[..., 1], t[..., 0])

    def project_many(self, pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Vectorized projection of (m, 2) points: arclength s and signed offset l."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        rel = pts[:, None, :] - self.points[None, :-1, :]  # (m, nseg, 2)
        t = np.einsum("mns,ns->mn", rel, self._seg) / (self._seg_len**2)[None, :]
        t = np.clip(t, 0.0, 1.0)
        proj = self.points[None, :-1, :] + t[:, :, None] * self._seg[None, :, :]
        d2 = np.sum((pts[:, None, :] - proj) ** 2, axis=2)
        best = np.argmin(d2, axis=1)
        m = np.arange(pts.shape[0])
        s = self.cumulative_arclength[best] + t[m, best] * self._seg_len[best]
        diff = pts - proj[m, best]
        u = self._seg_dir[best]
        l = u[:, 0] * diff[:, 1] - u[:, 1] * diff[:, 0]
        return s, l


def project_to_path(path: ReferencePath, position) -> tuple[float, float]:
    """Arclength of the nearest path point and signed lateral offset (left positive)."""
    s, l = path.project_many(np.asarray(position, dtype=float).reshape(1, 2))
    return float(s[0]), float(l[0])


@dataclass(frozen=True)
class TrafficStream:
    id: int
    approach: int
    movement: str
    path: ReferencePath


@dataclass(frozen=True)
class ConflictPoint:
    stream_a: int
    stream_b: int
    arc_pos_a: float
    arc_pos_b: float
    x: float
    y: float
    zone_radius: float = 2.0


@dataclass(frozen=True)
class Approach:
    index: int
    heading: float
    entry_point: tuple[float, float]


@dataclass(frozen=True)
class ScenarioConfig:
    approach_length: float = 40.0
    lane_width: float = 3.5
    resample_step: float = 0.5
    zone_radius: float = 2.0
    # (approach index, movement) per stream; ids assigned in listed order
    streams: tuple = (
        (0, "straight"),
        (0, "left"),
        (1, "straight"),
        (2, "straight"),
        (2, "left"),
        (3, "straight"),
    )
    left_turn_radius: float | None = None
    right_turn_radius: float | None = None


@dataclass
class IntersectionLayout:
    approaches: list[Approach]
    approach_length: float
    lane_width: float
    streams: list[TrafficStream]
    conflict_points: list[ConflictPoint]
    half_box: float = field(default=7.0)

    def stream(self, stream_id: int) -> TrafficStream:
        return self._by_id[stream_id]

    def __post_init__(self):
        self._by_id = {s.id: s for s in self.streams}
        self._conf_by_pair: dict[tuple[int, int], list[ConflictPoint]] = {}
        for cp in self.conflict_points:
            self._conf_by_pair.setdefault((cp.stream_a, cp.stream_b), []).append(cp)

    def conflicts_between(self, a: int, b: int) -> list[ConflictPoint]:
        key = (min(a, b), max(a, b))
        return self._conf_by_pair.get(key, [])

    def conflict_graph(self) -> dict[int, set[int]]:
        graph: dict[int, set[int]] = {s.id: set() for s in self.streams}
        for cp in self.conflict_points:
            graph[cp.stream_a].add(cp.stream_b)
            graph[cp.stream_b].add(cp.stream_a)
        return graph

    def conflicts_of(self, stream_id: int) -> list[ConflictPoint]:
        return [
            cp
            for cp in self.conflict_points
            if cp.stream_a == stream_id or cp.stream_b == stream_id
        ]


def _resample(points: np.ndarray, step: float) -> np.ndarray:
    """Resample a polyline so consecutive points are at most `step` apart."""
    pts = np.asarray(points, dtype=float)
    seg = np.diff(pts, axis=0)
    seg_len = np.hypot(seg[:, 0], seg[:, 1])
    cum = np.concatenate(([0.0], np.cumsum(seg_len)))
    total = cum[-1]
    n = max(2, int(math.ceil(total / step)) + 1)
    s = np.linspace(0.0, total, n)
    x = np.interp(s, cum, pts[:, 0])
    y = np.interp(s, cum, pts[:, 1])
    return np.stack([x, y], axis=1)


def _arc_points(center: np.ndarray, radius: float, a0: float, a1: float, ccw: bool, step: float) -> np.ndarray:
    """Points along a circular arc from angle a0 to a1 (radians), exclusive of endpoints' duplicates."""
    if ccw:
        while a1 <= a0:
            a1 += 2.0 * math.pi
    else:
        while a1 >= a0:
            a1 -= 2.0 * math.pi
    sweep = a1 - a0
    n = max(2, int(math.ceil(abs(sweep) * radius / step)) + 1)
    ang = np.linspace(a0, a1, n)
    return center[None, :] + radius * np.stack([np.cos(ang), np.sin(ang)], axis=1)


def _build_stream_polyline(approach: int, movement: str, lane_in: float, lane_out: float,
                           cfg: ScenarioConfig, half_box: float) -> np.ndarray:
    """Centerline polyline for one stream, entry end to exit end."""
    h = _HEADINGS[approach]
    r = _right_of(h)
    reach = half_box + cfg.approach_length
    entry = -reach * h + lane_in * r

    if movement == "straight":
        exit_pt = reach * h + lane_in * r
        return np.stack([entry, exit_pt])

    if movement == "left":
        e = _left_of(h)
        radius = cfg.left_turn_radius
        if radius is None:
            radius = min(lane_in, lane_out) + half_box - 0.75
        ccw = True
    else:
        e = _right_of(h)
        radius = cfg.right_turn_radius
        if radius is None:
            radius = max(1.0, half_box - max(lane_in, lane_out))
        ccw = False

    r_e = _right_of(e)
    # circle tangent to the entry lane line (direction h) and exit lane line
    # (direction e); the center sits on the turning side of both lines
    shift_in = _left_of(h) if ccw else _right_of(h)
    shift_out = _left_of(e) if ccw else _right_of(e)
    center = lane_in * r + lane_out * r_e + radius * (shift_in + shift_out)
    # tangent points: feet of the perpendicular from the center onto each lane line
    tp1 = lane_in * r + float(np.dot(center, h)) * h
    tp2 = lane_out * r_e + float(np.dot(center, e)) * e
    a0 = math.atan2(tp1[1] - center[1], tp1[0] - center[0])
    a1 = math.atan2(tp2[1] - center[1], tp2[0] - center[0])
    arc = _arc_points(center, radius, a0, a1, ccw, cfg.resample_step)
    exit_pt = reach * e + lane_out * r_e
    pts = [entry]
    if np.linalg.norm(tp1 - entry) > 1e-9:
        pts.append(tp1)
    body = [np.asarray(p) for p in arc[1:]]
    pts.extend(body)
    if np.linalg.norm(exit_pt - pts[-1]) > 1e-9:
        pts.append(exit_pt)
    return np.stack(pts)


def _segment_crossings(pa: np.ndarray, pb: np.ndarray) -> list[tuple[float, float, float, float]]:
    """All transversal crossings between two polylines.

    Returns (arc_a, arc_b, x, y) per crossing, merged so each geometric
    crossing yields one entry (hits closer than 0.5 m along both paths
    collapse onto the first). Parallel overlaps are ignored.
    """
    sa = np.diff(pa, axis=0)
    sb = np.diff(pb, axis=0)
    len_a = np.hypot(sa[:, 0], sa[:, 1])
    len_b = np.hypot(sb[:, 0], sb[:, 1])
    cum_a = np.concatenate(([0.0], np.cumsum(len_a)))
    cum_b = np.concatenate(([0.0], np.cumsum(len_b)))

    # cross products via broadcasting: denom[i, j] = cross(sa[i], sb[j])
    denom = sa[:, 0][:, None] * sb[:, 1][None, :] - sa[:, 1][:, None] * sb[:, 0][None, :]
    qp = pb[None, :-1, :] - pa[:-1, None, :]  # (na, nb, 2)
    cross_qp_sb = qp[:, :, 0] * sb[None, :, 1] - qp[:, :, 1] * sb[None, :, 0]
    cross_qp_sa = qp[:, :, 0] * sa[:, None, 1] - qp[:, :, 1] * sa[:, None, 0]
    with np.errstate(divide="ignore", invalid="ignore"):
        t = cross_qp_sb / denom
        u = cross_qp_sa / denom
    eps = 1e-9
    ok = (np.abs(denom) > 1e-12) & (t >= -eps) & (t <= 1 + eps) & (u >= -eps) & (u <= 1 + eps)
    hits = []
    ia, ib = np.nonzero(ok)
    for i, j in zip(ia.tolist(), ib.tolist()):
        ti = min(max(t[i, j], 0.0), 1.0)
        uj = min(max(u[i, j], 0.0), 1.0)
        arc_a = cum_a[i] + ti * len_a[i]
        arc_b = cum_b[j] + uj * len_b[j]
        x = pa[i, 0] + ti * sa[i, 0]
        y = pa[i, 1] + ti * sa[i, 1]
        hits.append((arc_a, arc_b, x, y))
    hits.sort(key=lambda h: (h[0], h[1]))
    merged: list[tuple[float, float, float, float]] = []
    for h in hits:
        drop = False
        for m in merged:
            if abs(h[0] - m[0]) <= 0.5 and abs(h[1] - m[1]) <= 0.5:
                drop = True
                break
        if not drop:
            merged.append(h)
    return merged


def find_conflict_points(streams: list[TrafficStream], zone_radius: float) -> list[ConflictPoint]:
    """Pairwise transversal crossings of the resampled reference paths."""
    out: list[ConflictPoint] = []
    for i in range(len(streams)):
        for j in range(i + 1, len(streams)):
            a, b = streams[i], streams[j]
            for arc_a, arc_b, x, y in _segment_crossings(a.path.points, b.path.points):
                out.append(
                    ConflictPoint(
                        stream_a=min(a.id, b.id),
                        stream_b=max(a.id, b.id),
                        arc_pos_a=arc_a if a.id < b.id else arc_b,
                        arc_pos_b=arc_b if a.id < b.id else arc_a,
                        x=x,
                        y=y,
                        zone_radius=zone_radius,
                    )
                )
    out.sort(key=lambda c: (c.stream_a, c.stream_b, c.arc_pos_a))
    return out


def build_intersection(config: ScenarioConfig) -> IntersectionLayout:
    """Construct the layout and compute every cross-stream conflict point."""
    half_box = 2.0 * config.lane_width
    by_approach: dict[int, list[str]] = {}
    for approach, movement in config.streams:
        if approach not in (0, 1, 2, 3):
            raise InvalidConfig(f"approach index {approach} outside the 4-approach layout")
        if movement not in MOVEMENTS:
            raise InvalidConfig(f"unknown movement {movement!r}")
        moves = by_approach.setdefault(approach, [])
        if movement in moves:
            raise InvalidConfig(f"approach {approach} lists movement {movement!r} twice")
        moves.append(movement)
    for approach, moves in by_approach.items():
        if len(moves) > 2:
            raise InvalidConfig(f"approach {approach} has more than two streams")

    inner = config.lane_width / 2.0
    outer = 1.5 * config.lane_width
    streams: list[TrafficStream] = []
    exit_slots: dict[tuple[int, float], int] = {}
    for sid, (approach, movement) in enumerate(config.streams):
        moves = by_approach[approach]
        if movement == "left":
            lane_in = inner
        elif movement == "right":
            lane_in = outer
        else:
            lane_in = outer if "left" in moves else inner
        lane_out = lane_in if movement == "straight" else outer
        poly = _build_stream_polyline(approach, movement, lane_in, lane_out, config, half_box)
        poly = _resample(poly, config.resample_step)
        path = ReferencePath(poly)
        # exit arm bookkeeping: forbid two streams discharging onto one lane
        h = _HEADINGS[approach]
        if movement == "straight":
            exit_dir = h
        elif movement == "left":
            exit_dir = _left_of(h)
        else:
            exit_dir = _right_of(h)
        arm = int(np.argmax([float(np.dot(exit_dir, hh)) for hh in _HEADINGS]))
        slot = (arm, lane_out)
        if slot in exit_slots:
            raise InvalidConfig(
                f"streams {exit_slots[slot]} and {sid} share an exit lane on arm {arm}"
            )
        exit_slots[slot] = sid
        streams.append(TrafficStream(id=sid, approach=approach, movement=movement, path=path))

    approaches = [
        Approach(
            index=i,
            heading=math.atan2(_HEADINGS[i][1], _HEADINGS[i][0]),
            entry_point=tuple((-(half_box + config.approach_length) * _HEADINGS[i]).tolist()),
        )
        for i in range(4)
    ]
    conflicts = find_conflict_points(streams, config.zone_radius)
    return IntersectionLayout(
        approaches=approaches,
        approach_length=config.approach_length,
        lane_width=config.lane_width,
        streams=streams,
        conflict_points=conflicts,
        half_box=half_box,
    )
