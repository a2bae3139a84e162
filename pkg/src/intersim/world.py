"""Frame-frozen world snapshot shared by the decision modules."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING

from .dynamics import VehicleState
from .scenario import IntersectionLayout

if TYPE_CHECKING:  # pragma: no cover
    from .drivers import DriverProfile


@dataclass
class VehicleInfo:
    vid: int
    cls: str  # "hv" or "cav"
    stream: int
    profile: "DriverProfile"
    state: VehicleState
    entry_order: int
    spawn_time: float
    s: float = 0.0  # arc position along the stream path, kept fresh by the engine


@dataclass
class WorldState:
    """Immutable-by-convention snapshot of one frame."""

    layout: IntersectionLayout
    time: float
    vehicles: dict[int, VehicleInfo] = field(default_factory=dict)

    def ordered(self) -> list[VehicleInfo]:
        return [self.vehicles[k] for k in sorted(self.vehicles)]

    def on_stream(self, stream_id: int) -> list[VehicleInfo]:
        """Vehicles on one stream, front (largest s) first."""
        out = [v for v in self.vehicles.values() if v.stream == stream_id]
        out.sort(key=lambda v: (-v.s, v.vid))
        return out

    def predecessor_of(self, vid: int) -> VehicleInfo | None:
        ego = self.vehicles[vid]
        best = None
        for v in self.vehicles.values():
            if v.vid == vid or v.stream != ego.stream or v.s <= ego.s:
                continue
            if best is None or v.s < best.s:
                best = v
        return best

    def occupied_streams(self) -> list[int]:
        return sorted({v.stream for v in self.vehicles.values()})
