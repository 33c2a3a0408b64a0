"""Headless entry point: scenario runner, snapshots, and mission artifacts."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .fleet import Simulation
from .mapping import AnnotatedMap, export_map, export_map_text
from .scenario import Scenario, ScriptRunner, load_scenario

SNAPSHOT_PERIOD = 0.1  # s sim time (10 Hz)
SNAPSHOT_MAX_BEAMS = 90
DEFAULT_TIME_CAP = 600.0

EXIT_OK = 0
EXIT_SCENARIO_INVALID = 1
EXIT_DEADLOCK = 2
EXIT_MISSION_FAILED = 3


class SnapshotStream:
    """Per-client incremental snapshot source.

    Map points are sent exactly once; replaying every delta from the
    stream start rebuilds the current map byte-for-byte against the
    direct export. When the authoritative map object changes (the hand-off
    from outdoor to indoor robot), the stream resets and resends.
    """

    def __init__(self, sim: Simulation):
        self.sim = sim
        self._map_id: Optional[int] = None
        self._sent_points = 0
        self._sent_annotations: dict[int, tuple[str, float]] = {}
        self._detection_cursor = 0

    def _map_delta(self) -> Optional[dict]:
        map_ = self.sim.display_map()
        if map_ is None:
            return None
        reset = id(map_) != self._map_id
        if reset:
            self._map_id = id(map_)
            self._sent_points = 0
            self._sent_annotations = {}
        pts = []
        for i in range(self._sent_points, len(map_)):
            pts.append([map_._xs[i], map_._ys[i], map_._descriptors[i]])
        self._sent_points = len(map_)
        anns = []
        for idx in sorted(map_.annotations):
            ann = map_.annotations[idx]
            key = (ann.level, ann.observation_distance)
            if self._sent_annotations.get(idx) != key:
                self._sent_annotations[idx] = key
                anns.append([idx, ann.level, round(ann.observation_distance, 4)])
        return {
            "reset": reset,
            "frame": map_.origin_frame,
            "voxel": map_.voxel,
            "points": pts,
            "annotations": anns,
        }

    def _decimated_scan(self, robot) -> Optional[dict]:
        scan = robot.last_scan
        if scan is None:
            return None
        n = len(scan.angles)
        stride = max(1, math.ceil(n / SNAPSHOT_MAX_BEAMS))
        idx = range(0, n, stride)
        return {
            "angles": [round(scan.angles[i], 4) for i in idx],
            "ranges": [round(scan.ranges[i], 3) for i in idx],
            "hits": [scan.hits[i] for i in idx],
        }

    def snapshot(self) -> dict:
        sim = self.sim
        robots = {}
        for rid, robot in sim.robots.items():
            est = robot.estimated_pose
            robots[rid] = {
                "estimate": None if est is None else
                {"x": round(est.x, 4), "y": round(est.y, 4), "theta": round(est.theta, 4)},
                "mode": robot.mode,
                "camera_pan": round(robot.camera_pan, 4),
                "scan": self._decimated_scan(robot),
            }
        links = []
        for (a, b), link in sorted(sim.network.links.items()):
            links.append({
                "a": a, "b": b, "loss": round(link.loss, 2), "up": link.up,
                "budget": sim.network.nodes[a].profile.link_budget,
            })
        transfer = None
        if sim.mission.transfer is not None:
            s = sim.mission.transfer
            transfer = {"acked": s.chunks_acked, "total": s.chunks_total, "state": s.state}
        detections = [
            {"robot": d.robot_id, "mean_gray": round(d.reading.mean_gray, 2),
             "points": d.annotated_point_count}
            for d in sim.mission.detections[self._detection_cursor:]
        ]
        self._detection_cursor = len(sim.mission.detections)
        return {
            "sim_time": round(sim.time, 4),
            "phase": sim.mission.phase,
            "active_robot": sim.mission.active_robot,
            "robots": robots,
            "map": self._map_delta(),
            "links": links,
            "transfer": transfer,
            "detections": detections,
            "collisions": sim.collision_count,
        }


def rebuild_map_from_deltas(deltas: list[dict]) -> Optional[AnnotatedMap]:
    """Reconstruct the map a snapshot stream described (testing/debug aid)."""
    map_: Optional[AnnotatedMap] = None
    pending_annotations: dict[int, tuple[str, float]] = {}
    for delta in deltas:
        if delta is None:
            continue
        if delta["reset"] or map_ is None:
            map_ = AnnotatedMap(voxel=delta["voxel"], origin_frame=delta["frame"])
            pending_annotations = {}
        for x, y, desc in delta["points"]:
            map_.insert(x, y, desc)
        for idx, level, dist in delta["annotations"]:
            pending_annotations[idx] = (level, dist)
    if map_ is not None:
        from .mapping import RadiationAnnotation

        for idx, (level, dist) in pending_annotations.items():
            map_.annotations[idx] = RadiationAnnotation(
                level=level, observation_distance=dist, observed_at=0.0
            )
    return map_


@dataclass
class RunResult:
    exit_code: int
    sim: Simulation
    reason: str = ""
    artifacts: dict = field(default_factory=dict)


def run_scenario(
    scenario,
    seed: Optional[int] = None,
    out_dir: Optional[Path] = None,
    time_cap: float = DEFAULT_TIME_CAP,
    render: bool = False,
) -> RunResult:
    """Run a scenario headlessly to script completion or the time cap.

    Writes the mission log, map exports, and metrics report into out_dir.
    Nonzero exit codes distinguish script deadlock (an awaited event never
    fired) from mission failure (Complete unreached, or replay aborted by
    a collision).
    """
    if not isinstance(scenario, Scenario):
        scenario = load_scenario(scenario)
    sim = scenario.build(seed=seed)
    runner = ScriptRunner(sim, scenario.script)
    while sim.time < time_cap:
        runner.tick()
        if runner.finished and sim.mission.phase == "Complete":
            break
        if runner.finished and not scenario.script:
            pass  # scriptless run: just simulate to the cap
        sim.step()

    reason = ""
    exit_code = EXIT_OK
    if scenario.script:
        if not runner.finished and runner.waiting_on is not None:
            exit_code = EXIT_DEADLOCK
            reason = f"script deadlock: still awaiting {runner.waiting_on!r} at t={sim.time:.1f}"
        elif sim.mission.phase != "Complete":
            exit_code = EXIT_MISSION_FAILED
            reason = f"mission ended in phase {sim.mission.phase} at t={sim.time:.1f}"
        elif any(r["kind"] == "event" and r.get("event") == "repeat_abort" for r in sim.log):
            exit_code = EXIT_MISSION_FAILED
            reason = "collision during path replay"

    metrics = sim.compute_metrics()
    sim.log.append({
        "t": round(sim.time, 6), "kind": "metric",
        "areas": {rid: m["area_m2"] for rid, m in metrics["robots"].items()},
        "area_union": metrics["area_union_m2"],
    })

    artifacts = {}
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        log_path = out_dir / "mission_log.jsonl"
        with log_path.open("w") as f:
            for rec in sim.log:
                f.write(json.dumps(rec, sort_keys=True) + "\n")
        artifacts["log"] = log_path
        map_ = sim.display_map()
        if map_ is not None:
            (out_dir / "map.bin").write_bytes(export_map(map_))
            (out_dir / "map.txt").write_text(export_map_text(map_))
            artifacts["map"] = out_dir / "map.bin"
        metrics_path = out_dir / "metrics.json"
        metrics_path.write_text(json.dumps(metrics, indent=2, sort_keys=True) + "\n")
        artifacts["metrics"] = metrics_path
        if render and map_ is not None:
            from .render import render_map, trajectories_from_log

            image = render_map(map_, trajectories=trajectories_from_log(sim.log))
            image.save(out_dir / "map.png")
            artifacts["raster"] = out_dir / "map.png"
    return RunResult(exit_code=exit_code, sim=sim, reason=reason, artifacts=artifacts)


def replay_log(log_path: Path) -> list[dict]:
    """Load a recorded mission log for inspection or re-render."""
    records = []
    with Path(log_path).open() as f:
        for line in f:
            line = line.strip()
            if line:
                records.append(json.loads(line))
    return records


def replay_commands(scenario, log_records: list[dict], seed: Optional[int] = None,
                    time_cap: float = DEFAULT_TIME_CAP) -> Simulation:
    """Re-execute a recorded command stream against a fresh simulation.

    Determinism makes the resulting log comparable record-for-record with
    the original, which is the primary debugging workflow.
    """
    from .fleet import CommandRejected, OperatorCommand

    if not isinstance(scenario, Scenario):
        scenario = load_scenario(scenario)
    sim = scenario.build(seed=seed)
    commands = [r for r in log_records if r["kind"] == "command" and "rejected" not in r]
    cursor = 0
    end_time = max((r["t"] for r in log_records), default=0.0)
    while sim.time <= min(end_time, time_cap) + 1e-9:
        while cursor < len(commands) and commands[cursor]["t"] <= sim.time + 1e-9:
            rec = commands[cursor]
            cursor += 1
            data = {k: v for k, v in rec.items() if k not in ("t", "kind", "cmd", "robot")}
            try:
                sim.handle_command(
                    OperatorCommand(kind=rec["cmd"], robot_id=rec.get("robot"), data=data)
                )
            except CommandRejected:
                pass
        sim.step()
    return sim
