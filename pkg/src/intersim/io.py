"""Config files and bit-exact data export.

The config file is a JSON document mirroring SimConfig field names. All CSV
output uses fixed six-decimal formatting so repeated runs are byte-identical;
the run manifest stores SHA-256 digests of every output file.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from pathlib import Path

from .baselines import BaselineConfig
from .cooperative import CoopConfig
from .drivers import PRESETS, HvConfig
from .engine import LogRow, SimConfig, SimLog, VehicleRecord
from .errors import ConfigParseError, DemoFormatError
from .metrics import MetricsSummary, PetEvent
from .scenario import ScenarioConfig

ARTIFACT_VERSION = "0.1.0"

TRAJECTORY_COLUMNS = (
    "frame,time_s,vehicle_id,class,driver_type,stream_id,x,y,v,yaw,a,omega,k_level"
)


def _fmt(x: float) -> str:
    return f"{x:.6f}"


def config_to_dict(config: SimConfig) -> dict:
    d = dataclasses.asdict(config)
    d["scenario"]["streams"] = [list(s) for s in config.scenario.streams]
    d["hv_composition"] = list(config.hv_composition)
    return d


def _build_section(cls, data: dict, section: str):
    allowed = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - allowed
    if unknown:
        raise ConfigParseError(f"unknown keys in {section}: {sorted(unknown)}")
    return cls(**data)


def config_from_dict(data: dict) -> SimConfig:
    if not isinstance(data, dict):
        raise ConfigParseError("config root must be an object")
    data = dict(data)
    try:
        scenario = data.pop("scenario", None)
        hv = data.pop("hv", None)
        coop = data.pop("coop", None)
        baseline = data.pop("baseline", None)
        parts = {}
        if scenario is not None:
            scenario = dict(scenario)
            if "streams" in scenario:
                scenario["streams"] = tuple(
                    (int(a), str(m)) for a, m in scenario["streams"]
                )
            parts["scenario"] = _build_section(ScenarioConfig, scenario, "scenario")
        if hv is not None:
            parts["hv"] = _build_section(HvConfig, dict(hv), "hv")
        if coop is not None:
            parts["coop"] = _build_section(CoopConfig, dict(coop), "coop")
        if baseline is not None:
            parts["baseline"] = _build_section(BaselineConfig, dict(baseline), "baseline")
        if "hv_composition" in data:
            data["hv_composition"] = tuple(float(x) for x in data["hv_composition"])
        allowed = {f.name for f in dataclasses.fields(SimConfig)}
        unknown = set(data) - allowed
        if unknown:
            raise ConfigParseError(f"unknown config keys: {sorted(unknown)}")
        cfg = SimConfig(**data, **parts)
        cfg.validate()
        return cfg
    except ConfigParseError:
        raise
    except Exception as exc:
        raise ConfigParseError(f"invalid config: {exc}") from exc


def load_config_file(path: str | Path) -> SimConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigParseError(f"cannot read config file {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigParseError(f"config is not valid JSON: {exc}") from exc
    return config_from_dict(data)


def write_trajectories(log: SimLog, path: str | Path) -> None:
    lines = [TRAJECTORY_COLUMNS]
    for row in log.rows:
        rec = log.vehicles[row.vid]
        k = "" if row.k is None else str(row.k)
        lines.append(
            f"{row.frame},{_fmt(row.frame * log.dt)},{row.vid},{rec.cls},{rec.kind},"
            f"{rec.stream},{_fmt(row.x)},{_fmt(row.y)},{_fmt(row.v)},{_fmt(row.gamma)},"
            f"{_fmt(row.a)},{_fmt(row.omega)},{k}"
        )
    Path(path).write_text("\n".join(lines) + "\n")


def read_trajectories(path: str | Path) -> SimLog:
    """Reconstruct a SimLog from trajectories.csv at the printed precision."""
    try:
        lines = Path(path).read_text().strip().splitlines()
    except OSError as exc:
        raise DemoFormatError(f"cannot read {path}: {exc}") from exc
    if not lines or lines[0] != TRAJECTORY_COLUMNS:
        raise DemoFormatError("missing or wrong trajectories.csv header")
    if len(lines) == 1:
        raise DemoFormatError("trajectories.csv contains no rows")
    dt = None
    rows = []
    for line in lines[1:]:
        parts = line.split(",")
        if len(parts) != 13:
            raise DemoFormatError(f"malformed row: {line!r}")
        frame = int(parts[0])
        t = float(parts[1])
        if dt is None and frame > 0:
            dt = t / frame
        rows.append(parts)
    dt = dt if dt is not None else 0.1
    log = SimLog(dt=dt)
    max_frame = 0
    for parts in rows:
        frame = int(parts[0])
        vid = int(parts[2])
        max_frame = max(max_frame, frame)
        if vid not in log.vehicles:
            kind = parts[4]
            if kind not in PRESETS:
                raise DemoFormatError(f"unknown driver type {kind!r}")
            log.vehicles[vid] = VehicleRecord(
                vid=vid,
                cls=parts[3],
                kind=kind,
                stream=int(parts[5]),
                v_target=PRESETS[kind].v_target,
                entry_order=0,
                spawn_frame=frame,
            )
        log.vehicles[vid].exit_frame = frame
        log.rows.append(
            LogRow(
                frame=frame,
                vid=vid,
                x=float(parts[6]),
                y=float(parts[7]),
                v=float(parts[8]),
                gamma=float(parts[9]),
                a=float(parts[10]),
                omega=float(parts[11]),
                k=int(parts[12]) if parts[12] != "" else None,
            )
        )
    log.frames_run = max_frame + 1
    log.spawned = len(log.vehicles)
    order = sorted(log.vehicles, key=lambda v: (log.vehicles[v].spawn_frame, v))
    for rank, vid in enumerate(order):
        log.vehicles[vid].entry_order = rank
        if log.vehicles[vid].exit_frame == max_frame:
            log.vehicles[vid].exit_frame = None  # still in network at the end
    return log


def write_pet_csv(events: list[PetEvent], path: str | Path) -> None:
    lines = ["conflict_point,leader,follower,t_leader_exit,t_follower_entry,pet"]
    for e in events:
        lines.append(
            f"{e.conflict_point},{e.leader},{e.follower},"
            f"{_fmt(e.t_leader_exit)},{_fmt(e.t_follower_entry)},{_fmt(e.pet)}"
        )
    Path(path).write_text("\n".join(lines) + "\n")


def write_metrics_json(summary: MetricsSummary, path: str | Path) -> None:
    data = {
        "avg_travel_speed": summary.avg_travel_speed,
        "total_delay": summary.total_delay,
        "n_pet_events": len(summary.pet_list),
        "pet_min": min(summary.pet_list) if summary.pet_list else None,
        "pet_mean": (
            sum(summary.pet_list) / len(summary.pet_list) if summary.pet_list else None
        ),
        "pet_max": max(summary.pet_list) if summary.pet_list else None,
        "conflict_counts": summary.conflict_counts,
        "n_vehicles": summary.n_vehicles,
        "n_exited": summary.n_exited,
        "deadlock": summary.deadlock,
        "collisions": summary.collisions,
    }
    Path(path).write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


def sha256_of(path: str | Path) -> str:
    h = hashlib.sha256()
    h.update(Path(path).read_bytes())
    return h.hexdigest()


def write_manifest(config: SimConfig, out_dir: str | Path, files: list[str],
                   path: str | Path) -> None:
    out_dir = Path(out_dir)
    manifest = {
        "artifact_version": ARTIFACT_VERSION,
        "seed": config.seed,
        "config": config_to_dict(config),
        "digests": {name: sha256_of(out_dir / name) for name in sorted(files)},
    }
    Path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def verify_manifest(manifest_path: str | Path) -> bool:
    """True iff every recorded digest still matches its file."""
    manifest = json.loads(Path(manifest_path).read_text())
    base = Path(manifest_path).parent
    for name, digest in manifest["digests"].items():
        target = base / name
        if not target.exists() or sha256_of(target) != digest:
            return False
    return True
