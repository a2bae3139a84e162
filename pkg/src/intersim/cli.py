"""Command line front end: simulate, sweep, calibrate, metrics."""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from . import io as sio
from .drivers import PRESETS
from .engine import SimConfig, run
from .errors import (
    CollisionDetected,
    ConfigParseError,
    DeadlockDetected,
    DemoFormatError,
    NoSolution,
)
from .irl import (
    DemoContext,
    ExpertDemo,
    IrlConfig,
    elbow_sse,
    extract_cluster_features,
    generate_synthetic_demos,
    kmeans,
    maxent_irl,
    nearest_candidate_index,
    trajectory_features,
)
from .dynamics import Trajectory, VehicleState
from .metrics import pet_events, summarize
from .scenario import build_intersection

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NO_SOLUTION = 3
EXIT_COLLISION = 4
EXIT_DEADLOCK = 5


def _load_config(args) -> SimConfig:
    cfg = sio.load_config_file(args.config) if args.config else SimConfig()
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if getattr(args, "method", None) is not None:
        overrides["method"] = args.method
    if getattr(args, "volume", None) is not None:
        overrides["lane_volume"] = args.volume
    if getattr(args, "rop", None) is not None:
        overrides["rop"] = args.rop
    if getattr(args, "frames", None) is not None:
        overrides["frames"] = args.frames
    if getattr(args, "composition", None) is not None:
        parts = [float(x) for x in args.composition.split(",")]
        if len(parts) != 3:
            raise ConfigParseError("--composition wants three comma-separated fractions")
        overrides["hv_composition"] = tuple(parts)
    if overrides:
        cfg = dataclasses.replace(cfg, **overrides)
    cfg.validate()
    return cfg


def _write_outputs(cfg: SimConfig, log, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    layout = build_intersection(cfg.scenario)
    summary = summarize(log, layout, cfg.vehicle_radius)
    sio.write_trajectories(log, out_dir / "trajectories.csv")
    sio.write_metrics_json(summary, out_dir / "metrics.json")
    sio.write_pet_csv(
        pet_events(log, layout, cfg.vehicle_radius), out_dir / "pet.csv"
    )
    sio.write_manifest(
        cfg, out_dir, ["trajectories.csv", "metrics.json", "pet.csv"],
        out_dir / "manifest.json",
    )


def cmd_simulate(args) -> int:
    try:
        cfg = _load_config(args)
    except ConfigParseError as exc:
        print(f"ConfigParseError: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out_dir = Path(args.out)
    status, code = "ok", EXIT_OK
    try:
        log = run(cfg)
    except CollisionDetected as exc:
        log, status, code = exc.log, "CollisionDetected", EXIT_COLLISION
        print(f"CollisionDetected: {exc}", file=sys.stderr)
    except DeadlockDetected as exc:
        log, status, code = exc.log, "DeadlockDetected", EXIT_DEADLOCK
        print(f"DeadlockDetected: {exc}", file=sys.stderr)
    except NoSolution as exc:
        print(f"no solution: {exc}", file=sys.stderr)
        return EXIT_NO_SOLUTION
    _write_outputs(cfg, log, out_dir)
    if status == "ok":
        print(f"wrote {out_dir}/trajectories.csv metrics.json pet.csv manifest.json")
    return code


def cmd_sweep(args) -> int:
    try:
        base = sio.load_config_file(args.config) if args.config else SimConfig()
        volumes = [float(v) for v in args.volumes.split(",")]
        methods = [m.strip() for m in args.methods.split(",")]
        rops = [float(r) for r in args.rops.split(",")]
        seeds = [int(s) for s in args.seeds.split(",")]
    except (ConfigParseError, ValueError) as exc:
        print(f"ConfigParseError: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if not (volumes and methods and rops and seeds):
        print("ConfigParseError: empty sweep axis", file=sys.stderr)
        return EXIT_CONFIG

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    lines = ["method,volume,rop,seed_count,avg_speed,total_delay,status"]
    for method in methods:
        for volume in volumes:
            for rop in rops:
                speeds, delays = [], []
                status = "ok"
                for seed in seeds:
                    cfg = dataclasses.replace(
                        base, method=method, lane_volume=volume, rop=rop, seed=seed
                    )
                    try:
                        log = run(cfg)
                    except (CollisionDetected, DeadlockDetected) as exc:
                        status = type(exc).__name__
                        continue
                    layout = build_intersection(cfg.scenario)
                    summary = summarize(log, layout, cfg.vehicle_radius)
                    speeds.append(summary.avg_travel_speed)
                    delays.append(summary.total_delay)
                avg_speed = sum(speeds) / len(speeds) if speeds else float("nan")
                avg_delay = sum(delays) / len(delays) if delays else float("nan")
                lines.append(
                    f"{method},{volume:g},{rop:g},{len(speeds)},"
                    f"{avg_speed:.6f},{avg_delay:.6f},{status}"
                )
    (out_dir / "sweep.csv").write_text("\n".join(lines) + "\n")
    print(f"wrote {out_dir}/sweep.csv")
    return EXIT_OK


def _demos_from_log(log, layout, horizon: int, dt: float, stride: int = 5,
                    max_demos: int = 600) -> list[tuple[ExpertDemo, int]]:
    """Per-frame expert demos from a recorded run; returns (demo, vehicle id)."""
    by_frame: dict[int, list] = {}
    for row in log.rows:
        by_frame.setdefault(row.frame, []).append(row)
    demos = []
    for vid in sorted(log.vehicles):
        rec = log.vehicles[vid]
        if rec.cls != "hv":
            continue
        rows = log.rows_of(vid)
        path = layout.stream(rec.stream).path
        states = log.states_of(vid)
        for i in range(0, len(rows) - horizon, stride):
            frame = rows[i].frame
            ego_state = VehicleState(*states[i])
            opponents = tuple(
                VehicleState(r.x, r.y, r.v, r.gamma)
                for r in by_frame.get(frame, [])
                if r.vid != vid
            )
            actual = Trajectory(states[i : i + horizon + 1], dt)
            ctx = DemoContext(ego_state, opponents, path, horizon, dt, 0)
            idx = nearest_candidate_index(actual, ctx)
            ctx = DemoContext(ego_state, opponents, path, horizon, dt, idx)
            feats = trajectory_features(actual, path)
            demos.append((ExpertDemo(trajectory=actual, features=feats, context=ctx), vid))
            if len(demos) >= max_demos:
                return demos
    return demos


def _pick_elbow(sse: list[float]) -> int:
    if len(sse) < 3:
        return len(sse)
    curve = np.asarray(sse)
    second = curve[:-2] - 2 * curve[1:-1] + curve[2:]
    return int(np.argmax(second)) + 2  # index of the knee in 1-based k


def cmd_calibrate(args) -> int:
    irl_cfg = IrlConfig(
        learning_rate=args.lr, regularization=args.lam, epochs=args.epochs
    )
    out_path = Path(args.out)
    report: dict = {"irl_config": dataclasses.asdict(irl_cfg), "clusters": {}}
    layout = build_intersection(SimConfig().scenario)

    if args.synthetic:
        for idx, kind in enumerate(("aggressive", "normal", "conservative")):
            profile = PRESETS[kind]
            demos = generate_synthetic_demos(
                profile, layout, n=args.demos_per_type, seed=args.seed + idx,
                horizon=irl_cfg.horizon,
            )
            result = maxent_irl(demos, irl_cfg, seed=args.seed + idx)
            preset = profile.weights.as_array()
            raw = result.raw_theta
            cosine = float(
                np.dot(raw, preset) / (np.linalg.norm(raw) * np.linalg.norm(preset))
            )
            report["clusters"][kind] = {
                "n_demos": len(demos),
                "theta_normalized": result.theta.tolist(),
                "theta_raw": raw.tolist(),
                "weights": list(result.weights.as_array()),
                "preset": preset.tolist(),
                "cosine_to_preset": cosine,
                "likelihood_first": result.trace[0],
                "likelihood_final": result.trace[-1],
            }
        report["mode"] = "synthetic"
    else:
        if not args.demos:
            print("ConfigParseError: provide --demos FILE or --synthetic", file=sys.stderr)
            return EXIT_CONFIG
        try:
            log = sio.read_trajectories(args.demos)
            pairs = _demos_from_log(log, layout, irl_cfg.horizon, log.dt)
            if not pairs:
                raise DemoFormatError("no usable human-driver demonstrations found")
            vids = sorted({vid for _, vid in pairs})
            samples = []
            for vid in vids:
                states = log.states_of(vid)
                samples.append(extract_cluster_features(Trajectory(states, log.dt)))
            if args.clusters is not None:
                k = args.clusters
            else:
                sse = elbow_sse(samples, min(6, len(samples)), args.seed)
                k = _pick_elbow(sse)
                report["elbow_sse"] = sse
            labels, centers = kmeans(samples, k, args.seed)
            label_of = {vid: int(lbl) for vid, lbl in zip(vids, labels)}
            report["cluster_centers"] = centers.tolist()
            for c in range(k):
                cluster_demos = [d for d, vid in pairs if label_of[vid] == c]
                if not cluster_demos:
                    continue
                result = maxent_irl(cluster_demos, irl_cfg, seed=args.seed + c)
                report["clusters"][str(c)] = {
                    "n_demos": len(cluster_demos),
                    "theta_normalized": result.theta.tolist(),
                    "theta_raw": result.raw_theta.tolist(),
                    "weights": list(result.weights.as_array()),
                    "likelihood_first": result.trace[0],
                    "likelihood_final": result.trace[-1],
                }
            report["mode"] = "demos"
        except DemoFormatError as exc:
            print(f"DemoFormatError: {exc}", file=sys.stderr)
            return EXIT_CONFIG
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    print(f"wrote {out_path}")
    return EXIT_OK


def cmd_metrics(args) -> int:
    try:
        cfg = sio.load_config_file(args.config) if args.config else SimConfig()
        log = sio.read_trajectories(args.trajectories)
    except (ConfigParseError, DemoFormatError) as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    layout = build_intersection(cfg.scenario)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    summary = summarize(log, layout, cfg.vehicle_radius)
    sio.write_metrics_json(summary, out_dir / "metrics.json")
    sio.write_pet_csv(pet_events(log, layout, cfg.vehicle_radius), out_dir / "pet.csv")
    print(f"wrote {out_dir}/metrics.json pet.csv")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="intersim",
        description="Game-theoretic mixed-traffic simulator for an unsignalized intersection",
    )
    sub = p.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run one simulation and export its data")
    sim.add_argument("--config", default=None)
    sim.add_argument("--seed", type=int, default=None)
    sim.add_argument("--out", default="out")
    sim.add_argument("--method", choices=("ncl", "cl", "fcfs", "batch"), default=None)
    sim.add_argument("--volume", type=float, default=None)
    sim.add_argument("--rop", type=float, default=None)
    sim.add_argument("--composition", default=None, help="aggressive,normal,conservative")
    sim.add_argument("--frames", type=int, default=None)
    sim.set_defaults(func=cmd_simulate)

    sw = sub.add_parser("sweep", help="run a method/volume/rop/seed grid")
    sw.add_argument("--config", default=None)
    sw.add_argument("--methods", default="ncl")
    sw.add_argument("--volumes", default="300")
    sw.add_argument("--rops", default="1.0")
    sw.add_argument("--seeds", default="0")
    sw.add_argument("--out", default="out")
    sw.set_defaults(func=cmd_sweep)

    cal = sub.add_parser("calibrate", help="cluster demonstrations and fit reward weights")
    cal.add_argument("--demos", default=None, help="trajectories.csv-format demo file")
    cal.add_argument("--synthetic", action="store_true")
    cal.add_argument("--clusters", type=int, default=None)
    cal.add_argument("--lr", type=float, default=0.05)
    cal.add_argument("--lambda", dest="lam", type=float, default=0.01)
    cal.add_argument("--epochs", type=int, default=300)
    cal.add_argument("--seed", type=int, default=0)
    cal.add_argument("--demos-per-type", type=int, default=120)
    cal.add_argument("--out", default="calibration.json")
    cal.set_defaults(func=cmd_calibrate)

    met = sub.add_parser("metrics", help="recompute metrics from trajectories.csv")
    met.add_argument("--trajectories", required=True)
    met.add_argument("--config", default=None)
    met.add_argument("--out", default="out")
    met.set_defaults(func=cmd_metrics)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
