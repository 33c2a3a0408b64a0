"""Scenario documents: JSON schema -> Simulation, plus scripted operators."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

from .fleet import (
    CommandRejected,
    OperatorCommand,
    RobotSpec,
    SimConfig,
    Simulation,
)
from .geometry import Pose2D
from .navigation import GapParams
from .netsim import PROFILE_5GHZ, PROFILE_915MHZ, RadioProfile
from .radiation import GeigerConfig
from .registration import IcpParams, RelocalizeParams
from .sensors import CameraSpec, LidarSpec
from .world import ScenarioError, WorldModel, load_world

BUILTIN_PROFILES = {"915MHz": PROFILE_915MHZ, "5GHz": PROFILE_5GHZ}


@dataclass
class Scenario:
    world: WorldModel
    robots: list[tuple[RobotSpec, Pose2D]]
    radio_profiles: dict[str, RadioProfile]  # keyed by assignment name
    seed: int
    config: SimConfig
    base_position: tuple[float, float]
    script: list[dict] = field(default_factory=list)
    name: str = "scenario"

    def build(self, seed: Optional[int] = None) -> Simulation:
        return Simulation(
            world=self.world,
            robots=self.robots,
            radio_profiles=self.radio_profiles,
            seed=self.seed if seed is None else seed,
            config=self.config,
            base_position=self.base_position,
        )


def _lidar_spec(doc: dict) -> LidarSpec:
    return LidarSpec(
        beam_count=int(doc.get("beam_count", 180)),
        fov=float(doc.get("fov", 2.0 * math.pi)),
        max_range=float(doc.get("max_range", 20.0)),
        range_noise_sigma=float(doc.get("range_noise_sigma", 0.0)),
    )


def _camera_spec(doc: Optional[dict]) -> Optional[CameraSpec]:
    if doc is None:
        return None
    return CameraSpec(
        fov=float(doc.get("fov", 0.6)),
        max_effective_range=float(doc.get("max_effective_range", 8.0)),
        ambient_level=float(doc.get("ambient_level", 40.0)),
        gain=float(doc.get("gain", 1200.0)),
        min_distance=float(doc.get("min_distance", 0.5)),
    )


def _robot_spec(doc: dict, index: int) -> tuple[RobotSpec, Pose2D]:
    path = f"robots[{index}]"
    if "robot_id" not in doc:
        raise ScenarioError(path, "robot_id required")
    start = doc.get("start", [0.0, 0.0, 0.0])
    if len(start) != 3:
        raise ScenarioError(f"{path}.start", "expected [x, y, theta]")
    spec = RobotSpec(
        robot_id=str(doc["robot_id"]),
        footprint_radius=float(doc.get("footprint_radius", 0.4)),
        v_max=float(doc.get("v_max", 1.0)),
        omega_max=float(doc.get("omega_max", 1.5)),
        lidar=_lidar_spec(doc.get("lidar", {})),
        camera=_camera_spec(doc.get("camera")),
        camera_pan_limit=float(doc.get("camera_pan_limit", math.pi)),
        camera_offset=float(doc.get("camera_offset", 0.3)),
        radio_profile=str(doc.get("radio_profile", "915MHz")),
        lidar_rate=float(doc.get("lidar_rate", 5.0)),
        camera_rate=float(doc.get("camera_rate", 5.0)),
        odom_sigma_xy=float(doc.get("odom_sigma_xy", 0.01)),
        odom_sigma_theta=float(doc.get("odom_sigma_theta", 0.005)),
        teach_spacing=float(doc.get("teach_spacing", 1.0)),
    )
    return spec, Pose2D(float(start[0]), float(start[1]), float(start[2]))


def _radio_profiles(doc: dict, robots: list[tuple[RobotSpec, Pose2D]]) -> dict[str, RadioProfile]:
    profiles = dict(BUILTIN_PROFILES)
    for name, p in doc.get("profiles", {}).items():
        base = {
            "band_label": name,
            "ref_loss_at_1m": 40.0,
            "path_loss_exponent": 2.7,
            "per_wall_loss_multiplier": 1.0,
            "link_budget": 95.0,
            "capacity": 4e6,
            "base_latency": 0.02,
        }
        base.update(p)
        profiles[name] = RadioProfile(**base)
    assignments = doc.get("assignments", {})
    out = {}
    names = ["base"] + [spec.radio_profile for spec, _ in robots]
    for name in names:
        profile_name = assignments.get(name, name if name in profiles else "915MHz")
        if profile_name not in profiles:
            raise ScenarioError(f"radio.assignments.{name}", f"unknown profile {profile_name!r}")
        out[name] = profiles[profile_name]
    return out


def _sim_config(doc: dict) -> SimConfig:
    cfg = SimConfig()
    kw = {}
    for key in ("dt", "watchdog", "map_voxel", "scan_voxel", "coverage_cell"):
        if key in doc:
            kw[key] = float(doc[key])
    if "geiger" in doc:
        g = doc["geiger"]
        kw["geiger"] = GeigerConfig(
            threshold=float(g.get("threshold", 112.0)),
            fov=float(g.get("fov", 0.6)),
            max_projection_range=float(g.get("max_projection_range", 5.0)),
            bin_edges=tuple(g.get("bin_edges", (2.0, 3.0))),
        )
    if "gap" in doc:
        kw["gap"] = GapParams(**doc["gap"])
    if "icp" in doc:
        kw["icp"] = IcpParams(**doc["icp"])
    if "relocalize" in doc:
        r = dict(doc["relocalize"])
        icp = IcpParams(**r.pop("icp")) if "icp" in r else IcpParams()
        kw["relocalize"] = RelocalizeParams(icp=icp, **r)
    return replace(cfg, **kw)


def load_scenario(source) -> Scenario:
    """Parse a scenario document (path, JSON text, or parsed dict)."""
    name = "scenario"
    if isinstance(source, (str, Path)) and str(source).lstrip().startswith("{"):
        doc = json.loads(str(source))
    elif isinstance(source, (str, Path)):
        path = Path(source)
        doc = json.loads(path.read_text())
        name = path.stem
    else:
        doc = source
    world = load_world(doc)
    robots = [_robot_spec(r, i) for i, r in enumerate(doc.get("robots", []))]
    seen = set()
    for spec, _ in robots:
        if spec.robot_id in seen:
            raise ScenarioError("robots", f"duplicate robot_id {spec.robot_id!r}")
        seen.add(spec.robot_id)
    return Scenario(
        world=world,
        robots=robots,
        radio_profiles=_radio_profiles(doc.get("radio", {}), robots),
        seed=int(doc.get("seed", 0)),
        config=_sim_config(doc.get("sim", {})),
        base_position=tuple(doc.get("base_position", [0.0, 0.0])),
        script=list(doc.get("operator_script", [])),
        name=name,
    )


class ScriptDeadlock(RuntimeError):
    """An awaited event never fired before the time cap."""


class ScriptRunner:
    """Replays an operator script against a running simulation.

    Steps fire on a sim-time trigger ("at") or an awaited event ("await"),
    and perform either a single command or a timed drive directive that
    emits velocity commands at 10 Hz, like a held joystick.
    """

    COMMAND_RATE = 10.0  # Hz

    def __init__(self, sim: Simulation, steps: list[dict]):
        self.sim = sim
        self.steps = list(steps)
        self.index = 0
        self._events: set[str] = set()
        self._log_cursor = 0
        self._active_drive: Optional[dict] = None
        self._drive_until = 0.0
        self._next_emit = 0.0

    @property
    def finished(self) -> bool:
        return self.index >= len(self.steps) and self._active_drive is None

    @property
    def waiting_on(self) -> Optional[str]:
        if self.index < len(self.steps):
            return self.steps[self.index].get("await")
        return None

    def _collect_events(self):
        for rec in self.sim.log[self._log_cursor:]:
            if rec["kind"] == "phase_change":
                self._events.add(f"phase:{rec['phase']}")
            elif rec["kind"] == "event":
                self._events.add(rec["event"])
            elif rec["kind"] == "detection":
                self._events.add("detection")
        self._log_cursor = len(self.sim.log)

    def tick(self):
        """Call once per sim step, before Simulation.step()."""
        self._collect_events()
        if self._active_drive is not None:
            if self.sim.time >= self._drive_until - 1e-9:
                self._release_drive()
            else:
                self._emit_drive()
                return
        while self.index < len(self.steps) and self._active_drive is None:
            step = self.steps[self.index]
            if "at" in step and self.sim.time + 1e-9 < float(step["at"]):
                return
            if "await" in step and step["await"] not in self._events:
                return
            self.index += 1
            self._start(step)

    def _start(self, step: dict):
        if "command" in step:
            cmd = step["command"]
            try:
                self.sim.handle_command(
                    OperatorCommand(
                        kind=cmd["type"],
                        robot_id=cmd.get("robot_id"),
                        data={k: v for k, v in cmd.items() if k not in ("type", "robot_id")},
                    )
                )
            except CommandRejected as exc:
                self.sim._log_event("command", {"cmd": cmd["type"], "rejected": exc.reason})
        elif "drive" in step or "drive_gap" in step:
            key = "drive" if "drive" in step else "drive_gap"
            directive = dict(step[key])
            directive["_kind"] = key
            self._active_drive = directive
            self._drive_until = self.sim.time + float(directive.get("duration", 1.0))
            self._next_emit = self.sim.time
            self._emit_drive()
        elif "wait" in step:
            self._active_drive = {"_kind": "wait"}
            self._drive_until = self.sim.time + float(step["wait"])

    def _release_drive(self):
        """End a drive like a released joystick: one explicit zero command."""
        d = self._active_drive
        self._active_drive = None
        if d["_kind"] == "wait":
            return
        try:
            self.sim.handle_command(
                OperatorCommand(kind="velocity", robot_id=d["robot"],
                                data={"v": 0.0, "omega": 0.0})
            )
        except CommandRejected:
            pass

    def _emit_drive(self):
        d = self._active_drive
        if d is None or d["_kind"] == "wait":
            return
        if self.sim.time + 1e-9 < self._next_emit:
            return
        self._next_emit += 1.0 / self.COMMAND_RATE
        robot = d["robot"]
        if d["_kind"] == "drive":
            data = {"v": float(d.get("v", 0.0)), "omega": float(d.get("omega", 0.0))}
        else:
            data = {"v": 0.0, "omega": 0.0, "goal_heading": float(d.get("goal_heading", 0.0))}
        try:
            self.sim.handle_command(OperatorCommand(kind="velocity", robot_id=robot, data=data))
        except CommandRejected:
            pass  # outage: commands are dropped, the watchdog halts the robot
