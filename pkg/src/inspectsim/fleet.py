"""Robots, the mission state machine, and the deterministic simulation loop.

One single-threaded loop owns every mutable subsystem. Operator commands
enter through a serialized queue, travel to the robots as control-class
radio messages from the base-station node, and expire under a watchdog so
a dead link halts the platform.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .geometry import Pose2D, Transform2D, wrap_angle
from .mapping import (
    DEFAULT_MAP_VOXEL,
    DEFAULT_SCAN_VOXEL,
    AnnotatedMap,
    PointCloud,
    export_map,
    import_map,
    update_map,
    voxel_downsample,
)
from .navigation import (
    DONE,
    GapParams,
    PathRecorder,
    RepeatFollower,
    VelocityCommand,
    follow_the_gap,
)
from .netsim import Message, Network, RadioProfile, TransferSession
from .radiation import DetectionEvent, GeigerConfig, detect, project_detection
from .registration import IcpParams, InsufficientOverlapError, RelocalizeParams, icp_register, relocalize
from .sensors import CameraSpec, LidarSpec, Scan, simulate_camera_intensity, simulate_lidar
from .world import WorldModel

DEFAULT_DT = 0.05
DEFAULT_WATCHDOG = 0.5  # s; stale velocity commands halt the robot

PHASES = (
    "OutdoorMapping",
    "MapTransfer",
    "AwaitRelocalize",
    "IndoorInspection",
    "ReturnHome",
    "Complete",
)

MODES = ("manual", "gap_assist", "repeat", "idle")


@dataclass(frozen=True)
class RobotSpec:
    robot_id: str
    footprint_radius: float = 0.4
    v_max: float = 1.0
    omega_max: float = 1.5
    lidar: LidarSpec = field(default_factory=LidarSpec)
    camera: Optional[CameraSpec] = None
    camera_pan_limit: float = math.pi  # +/- rad around the chassis heading
    camera_offset: float = 0.3  # radial mount offset, m
    radio_profile: str = "915MHz"
    lidar_rate: float = 5.0  # Hz
    camera_rate: float = 5.0  # Hz
    odom_sigma_xy: float = 0.01  # per lidar tick
    odom_sigma_theta: float = 0.005
    teach_spacing: float = 1.0

    def __post_init__(self):
        if self.footprint_radius <= 0 or self.v_max <= 0 or self.omega_max <= 0:
            raise ValueError("footprint and speed limits must be > 0")


@dataclass
class RobotState:
    spec: RobotSpec
    pose: Pose2D  # ground truth, world frame
    estimated_pose: Optional[Transform2D] = None  # map frame
    mode: str = "idle"
    local_map: Optional[AnnotatedMap] = None
    received_map: Optional[AnnotatedMap] = None
    camera_pan: float = 0.0
    last_scan: Optional[Scan] = None
    last_scan_cloud: Optional[PointCloud] = None  # downsampled, robot frame
    cmd_v: float = 0.0
    cmd_omega: float = 0.0
    cmd_time: float = -math.inf
    goal_heading: float = 0.0
    goal_time: float = -math.inf
    recorder: Optional[PathRecorder] = None
    follower: Optional[RepeatFollower] = None
    next_lidar: float = 0.0
    next_camera: float = 0.0
    prev_odom_pose: Optional[Pose2D] = None
    distance_travelled: float = 0.0
    coverage_cells: set = field(default_factory=set)
    _lidar_rng: Optional[np.random.Generator] = None
    _odom_rng: Optional[np.random.Generator] = None

    def camera_world_pose(self) -> Pose2D:
        mount = Transform2D(self.spec.camera_offset, 0.0, self.camera_pan)
        return self.pose.compose(mount)


@dataclass
class MissionState:
    phase: str = "OutdoorMapping"
    active_robot: str = ""
    transfer: Optional[TransferSession] = None
    detections: list = field(default_factory=list)


@dataclass(frozen=True)
class OperatorCommand:
    kind: str  # velocity | set_mode | set_camera_pan | relocalize_guess |
    #            start_transfer | advance_phase | abort
    robot_id: Optional[str] = None
    data: dict = field(default_factory=dict)


class CommandRejected(Exception):
    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


@dataclass(frozen=True)
class SimConfig:
    dt: float = DEFAULT_DT
    watchdog: float = DEFAULT_WATCHDOG
    map_voxel: float = DEFAULT_MAP_VOXEL
    scan_voxel: float = DEFAULT_SCAN_VOXEL
    icp: IcpParams = field(default_factory=IcpParams)
    relocalize: RelocalizeParams = field(default_factory=RelocalizeParams)
    geiger: GeigerConfig = field(default_factory=GeigerConfig)
    gap: GapParams = field(default_factory=GapParams)
    coverage_cell: float = 1.0  # m, Table-I style area metric


class Simulation:
    """Deterministic discrete-time mission simulation."""

    def __init__(
        self,
        world: WorldModel,
        robots: list[tuple[RobotSpec, Pose2D]],
        radio_profiles: dict[str, RadioProfile],
        seed: int = 0,
        config: SimConfig = SimConfig(),
        base_position: tuple[float, float] = (0.0, 0.0),
    ):
        self.world = world
        self.config = config
        self.time = 0.0
        self.log: list[dict] = []
        self.collision_count = 0
        self.network = Network(world, config.dt, on_event=self._log_event)
        self.network.add_node("base", base_position, radio_profiles["base"])
        self.robots: dict[str, RobotState] = {}
        seeds = np.random.SeedSequence(seed).spawn(2 * len(robots))
        for i, (spec, pose) in enumerate(robots):
            state = RobotState(spec=spec, pose=pose)
            self.robots[spec.robot_id] = state
            self.network.add_node(
                spec.robot_id, (pose.x, pose.y), radio_profiles[spec.radio_profile]
            )
            state._lidar_rng = np.random.default_rng(seeds[2 * i])
            state._odom_rng = np.random.default_rng(seeds[2 * i + 1])
        first = next(iter(self.robots)) if self.robots else ""
        self.mission = MissionState(active_robot=first)
        self._mapping_enabled: set[str] = {first} if first else set()
        self._pending_commands: list[OperatorCommand] = []
        self._transfer_payload: Optional[tuple] = None
        self.on_phase_change: Optional[Callable[[str], None]] = None

    # -- logging -----------------------------------------------------------

    def _log_event(self, kind: str, payload: dict):
        self.log.append({"t": round(self.time, 6), "kind": kind, **payload})

    # -- command handling --------------------------------------------------

    def handle_command(self, cmd: OperatorCommand) -> str:
        """Validate at the base station, then route to its executor.

        Robot-directed commands ride the mesh as control messages, so a
        down link between base and robot delays or strands them exactly as
        it would in the field. Raises CommandRejected on validation
        failure; returns "ack" otherwise.
        """
        self._validate(cmd)
        self._log_event("command", {"cmd": cmd.kind, "robot": cmd.robot_id, **cmd.data})
        if cmd.kind in ("velocity", "set_mode", "set_camera_pan", "relocalize_guess"):
            msg = Message(
                msg_class="control",
                payload_size=64,
                source="base",
                destination=cmd.robot_id,
                enqueue_time=self.time,
                payload=cmd,
            )
            if not self.network.send(msg):
                raise CommandRejected("robot unreachable")
        else:
            self._pending_commands.append(cmd)
        return "ack"

    def _validate(self, cmd: OperatorCommand):
        if cmd.kind in ("velocity", "set_mode", "set_camera_pan", "relocalize_guess",
                        "start_transfer"):
            if cmd.robot_id not in self.robots:
                raise CommandRejected(f"unknown robot {cmd.robot_id!r}")
        if cmd.kind == "relocalize_guess" and self.mission.phase != "AwaitRelocalize":
            raise CommandRejected("wrong phase")
        if cmd.kind == "start_transfer" and self.mission.phase != "MapTransfer":
            raise CommandRejected("wrong phase")
        if cmd.kind == "set_mode" and cmd.data.get("mode") not in MODES:
            raise CommandRejected(f"unknown mode {cmd.data.get('mode')!r}")
        if cmd.kind == "advance_phase":
            if self.mission.phase not in ("OutdoorMapping", "IndoorInspection"):
                raise CommandRejected(f"cannot advance from {self.mission.phase}")
            if self.mission.phase == "OutdoorMapping":
                source = self.robots[self.mission.active_robot]
                if source.local_map is None or len(source.local_map) == 0:
                    raise CommandRejected("no map to transfer yet")

    def _apply_robot_command(self, robot: RobotState, cmd: OperatorCommand):
        if cmd.kind == "velocity":
            v = max(-robot.spec.v_max, min(robot.spec.v_max, float(cmd.data.get("v", 0.0))))
            omega = max(
                -robot.spec.omega_max,
                min(robot.spec.omega_max, float(cmd.data.get("omega", 0.0))),
            )
            if robot.mode == "gap_assist":
                robot.goal_heading = float(cmd.data.get("goal_heading", 0.0))
                robot.goal_time = self.time
            robot.cmd_v, robot.cmd_omega = v, omega
            robot.cmd_time = self.time
        elif cmd.kind == "set_mode":
            self._set_mode(robot, cmd.data["mode"])
        elif cmd.kind == "set_camera_pan":
            pan = float(cmd.data.get("pan", 0.0))
            limit = robot.spec.camera_pan_limit
            robot.camera_pan = max(-limit, min(limit, pan))
        elif cmd.kind == "relocalize_guess":
            self._attempt_relocalize(robot, cmd.data)

    def _set_mode(self, robot: RobotState, mode: str):
        if mode == "repeat":
            if robot.recorder is None or not robot.recorder.record.waypoints:
                self._log_event("command", {"cmd": "set_mode", "error": "no recorded path"})
                return
            robot.follower = RepeatFollower(robot.recorder.record, self._gap_params(robot))
        robot.mode = mode

    def _gap_params(self, robot: RobotState) -> GapParams:
        g = self.config.gap
        return GapParams(
            clearance_range=g.clearance_range,
            min_gap_width=g.min_gap_width,
            width_weight=g.width_weight,
            heading_weight=g.heading_weight,
            steer_gain=g.steer_gain,
            v_max=robot.spec.v_max,
            omega_max=robot.spec.omega_max,
        )

    # -- relocalization ----------------------------------------------------

    def _attempt_relocalize(self, robot: RobotState, data: dict):
        if robot.received_map is None or robot.last_scan_cloud is None:
            self._log_event("event", {"event": "relocalize_failure", "reason": "not ready"})
            return
        guess = Transform2D(float(data["x"]), float(data["y"]), float(data["theta"]))
        result = relocalize(
            robot.received_map, robot.last_scan_cloud, guess, self.config.relocalize
        )
        if result.success:
            robot.estimated_pose = result.transform
            robot.local_map = robot.received_map
            self._mapping_enabled.add(robot.spec.robot_id)
            self._log_event(
                "event",
                {"event": "relocalize_success", "robot": robot.spec.robot_id,
                 "residual": round(result.residual, 4)},
            )
            self.mission_transition("RelocalizeSuccess")
        else:
            self._log_event(
                "event",
                {"event": "relocalize_failure", "robot": robot.spec.robot_id,
                 "residual": round(result.residual, 4),
                 "inlier_fraction": round(result.inlier_fraction, 3)},
            )

    # -- mission state machine --------------------------------------------

    def mission_transition(self, event: str) -> MissionState:
        """Advance the phase machine; out-of-order events are rejected."""
        phase = self.mission.phase
        table = {
            ("OutdoorMapping", "advance_phase"): "MapTransfer",
            ("MapTransfer", "TransferComplete"): "AwaitRelocalize",
            ("AwaitRelocalize", "RelocalizeSuccess"): "IndoorInspection",
            ("IndoorInspection", "advance_phase"): "ReturnHome",
            ("IndoorInspection", "RepeatDone"): "ReturnHome",
            ("ReturnHome", "RepeatDone"): "Complete",
        }
        nxt = table.get((phase, event))
        if nxt is None:
            raise CommandRejected(f"event {event} invalid in phase {phase}")
        self.mission.phase = nxt
        if nxt == "AwaitRelocalize":
            self.mission.active_robot = self._camera_robot_id()
        if nxt == "IndoorInspection":
            robot = self.robots[self.mission.active_robot]
            robot.recorder = PathRecorder(robot.spec.teach_spacing)
        self._log_event("phase_change", {"phase": nxt})
        if self.on_phase_change:
            self.on_phase_change(nxt)
        return self.mission

    def _camera_robot_id(self) -> str:
        for rid, robot in self.robots.items():
            if robot.spec.camera is not None:
                return rid
        return self.mission.active_robot

    # -- simulation step ---------------------------------------------------

    def step(self):
        dt = self.config.dt
        self._deliver_radio_commands()
        self._run_base_commands()
        for rid in self.robots:
            self._step_robot(self.robots[rid], dt)
        for rid, robot in self.robots.items():
            self.network.set_position(rid, (robot.pose.x, robot.pose.y))
        self.network.step(dt)
        self._check_transfer()
        self.time += dt

    def run(self, duration: float):
        steps = int(round(duration / self.config.dt))
        for _ in range(steps):
            self.step()

    def _deliver_radio_commands(self):
        for rid in sorted(self.robots):
            for _, msg in self.network.drain_inbox(rid):
                if msg.msg_class == "control" and isinstance(msg.payload, OperatorCommand):
                    self._apply_robot_command(self.robots[rid], msg.payload)

    def _run_base_commands(self):
        pending, self._pending_commands = self._pending_commands, []
        for cmd in pending:
            if cmd.kind == "advance_phase":
                self.mission_transition("advance_phase")
            elif cmd.kind == "start_transfer":
                self._start_transfer(cmd)
            elif cmd.kind == "abort":
                if self.mission.transfer is not None:
                    self.network.abort_transfer(self.mission.transfer)
                for robot in self.robots.values():
                    robot.mode = "idle"
                    robot.cmd_v = robot.cmd_omega = 0.0

    def _start_transfer(self, cmd: OperatorCommand):
        source = self.robots[cmd.robot_id]
        dest = cmd.data.get("to", self._camera_robot_id())
        data = export_map(source.local_map)
        session = self.network.start_map_transfer(cmd.robot_id, dest, data)
        session_data = data
        self.mission.transfer = session
        self._transfer_payload = (session, session_data, dest)

    def _check_transfer(self):
        if self._transfer_payload is None:
            return
        session, data, dest = self._transfer_payload
        if session.state == "complete":
            self.robots[dest].received_map = import_map(data)
            self._transfer_payload = None
            self._log_event("transfer_progress", {"session": session.session_id,
                                                  "state": "complete"})
            self.mission_transition("TransferComplete")

    # -- robot stepping ----------------------------------------------------

    def _step_robot(self, robot: RobotState, dt: float):
        command = self._current_velocity(robot)
        self._integrate(robot, command, dt)
        if self.time >= robot.next_lidar - 1e-9:
            self._lidar_tick(robot)
            robot.next_lidar += 1.0 / robot.spec.lidar_rate
        if robot.spec.camera is not None and self.time >= robot.next_camera - 1e-9:
            self._camera_tick(robot)
            robot.next_camera += 1.0 / robot.spec.camera_rate
        if (
            robot.recorder is not None
            and robot.mode in ("manual", "gap_assist")
            and robot.estimated_pose is not None
        ):
            robot.recorder.observe(robot.estimated_pose)
        self.log.append(
            {
                "t": round(self.time, 6),
                "kind": "pose",
                "robot": robot.spec.robot_id,
                "x": round(robot.pose.x, 6),
                "y": round(robot.pose.y, 6),
                "theta": round(robot.pose.theta, 6),
                "est_x": None if robot.estimated_pose is None else round(robot.estimated_pose.x, 6),
                "est_y": None if robot.estimated_pose is None else round(robot.estimated_pose.y, 6),
                "est_theta": None if robot.estimated_pose is None else round(robot.estimated_pose.theta, 6),
                "mode": robot.mode,
            }
        )

    def _current_velocity(self, robot: RobotState) -> VelocityCommand:
        fresh = (self.time - robot.cmd_time) <= self.config.watchdog
        if robot.mode == "manual":
            if not fresh:
                return VelocityCommand(0.0, 0.0)  # watchdog halt
            return VelocityCommand(robot.cmd_v, robot.cmd_omega)
        if robot.mode == "gap_assist":
            goal_fresh = (self.time - robot.goal_time) <= self.config.watchdog
            if robot.last_scan is None or not goal_fresh:
                return VelocityCommand(0.0, 0.0)
            return follow_the_gap(robot.last_scan, robot.goal_heading, self._gap_params(robot))
        if robot.mode == "repeat":
            pose = robot.estimated_pose if robot.estimated_pose is not None else robot.pose
            out = robot.follower.command(pose)
            if out == DONE:
                robot.mode = "idle"
                self._log_event("event", {"event": "repeat_done",
                                          "robot": robot.spec.robot_id})
                try:
                    self.mission_transition("RepeatDone")
                except CommandRejected:
                    pass
                return VelocityCommand(0.0, 0.0)
            return out
        return VelocityCommand(0.0, 0.0)

    def _integrate(self, robot: RobotState, command: VelocityCommand, dt: float):
        v = max(-robot.spec.v_max, min(robot.spec.v_max, command.v))
        omega = max(-robot.spec.omega_max, min(robot.spec.omega_max, command.omega))
        pose = robot.pose
        nx = pose.x + v * math.cos(pose.theta) * dt
        ny = pose.y + v * math.sin(pose.theta) * dt
        ntheta = pose.theta + omega * dt
        if v != 0.0 and self._collides(nx, ny, robot.spec.footprint_radius):
            self.collision_count += 1
            self._log_event(
                "collision",
                {"robot": robot.spec.robot_id, "x": round(nx, 3), "y": round(ny, 3)},
            )
            if robot.mode == "repeat":
                robot.mode = "manual"  # abort replay to operator control
                self._log_event("event", {"event": "repeat_abort",
                                          "robot": robot.spec.robot_id})
            return
        robot.distance_travelled += math.hypot(nx - pose.x, ny - pose.y)
        robot.pose = Pose2D(nx, ny, ntheta)

    def _collides(self, x: float, y: float, radius: float) -> bool:
        for seg in self.world.segments:
            if not seg.opaque:
                continue
            if _point_segment_distance(x, y, seg.a, seg.b) < radius:
                return True
        return False

    # -- sensing and mapping ----------------------------------------------

    def _lidar_tick(self, robot: RobotState):
        scan = simulate_lidar(
            self.world, robot.pose, robot.spec.lidar, robot._lidar_rng, timestamp=self.time
        )
        robot.last_scan = scan
        pts = scan.hit_points_sensor_frame()
        cell = self.config.coverage_cell
        for px, py in pts:
            wx, wy = robot.pose.apply(px, py)
            robot.coverage_cells.add((math.floor(wx / cell), math.floor(wy / cell)))
        cloud = voxel_downsample(
            PointCloud(points=pts, frame_id=robot.spec.robot_id), self.config.scan_voxel
        ) if len(pts) else PointCloud(points=pts, frame_id=robot.spec.robot_id)
        robot.last_scan_cloud = cloud
        if robot.spec.robot_id not in self._mapping_enabled or len(cloud) < 3:
            robot.prev_odom_pose = robot.pose
            return
        if robot.local_map is None:
            robot.local_map = AnnotatedMap(
                voxel=self.config.map_voxel, origin_frame=robot.spec.robot_id
            )
            robot.estimated_pose = Transform2D.identity()
            update_map(robot.local_map, cloud, robot.estimated_pose)
            robot.prev_odom_pose = robot.pose
            return
        # odometry seed: true delta corrupted by per-tick Gaussian noise
        prev = robot.prev_odom_pose if robot.prev_odom_pose is not None else robot.pose
        delta = prev.delta_to(robot.pose)
        noise = robot._odom_rng.normal(
            0.0,
            [robot.spec.odom_sigma_xy, robot.spec.odom_sigma_xy, robot.spec.odom_sigma_theta],
        )
        noisy = Transform2D(delta.x + noise[0], delta.y + noise[1], delta.theta + noise[2])
        seed = robot.estimated_pose.compose(noisy)
        try:
            result = icp_register(cloud, robot.local_map.cloud(), seed, self.config.icp)
            robot.estimated_pose = result.transform
        except InsufficientOverlapError:
            robot.estimated_pose = seed
        update_map(robot.local_map, cloud, robot.estimated_pose)
        robot.prev_odom_pose = robot.pose

    def _camera_tick(self, robot: RobotState):
        camera_pose = robot.camera_world_pose()
        reading = simulate_camera_intensity(
            self.world, camera_pose, robot.spec.camera, timestamp=self.time
        )
        trigger = detect(reading, self.config.geiger)
        if trigger is None:
            return
        count = 0
        if robot.last_scan is not None and robot.estimated_pose is not None and robot.local_map is not None:
            annotations = project_detection(
                robot.last_scan, camera_pose, robot.estimated_pose,
                self.config.geiger, self.time,
            )
            for (mx, my), ann in annotations:
                idx = robot.local_map.insert(mx, my)
                robot.local_map.annotate(idx, ann)
                self.log.append(
                    {"t": round(self.time, 6), "kind": "annotation",
                     "robot": robot.spec.robot_id, "x": round(mx, 4), "y": round(my, 4),
                     "level": ann.level, "distance": round(ann.observation_distance, 3)}
                )
            count = len(annotations)
        event = DetectionEvent(
            reading=reading, annotated_point_count=count, robot_id=robot.spec.robot_id
        )
        self.mission.detections.append(event)
        self._log_event(
            "detection",
            {"robot": robot.spec.robot_id, "mean_gray": round(reading.mean_gray, 2),
             "annotated_points": count},
        )

    # -- outputs -----------------------------------------------------------

    def display_map(self) -> Optional[AnnotatedMap]:
        """The mission's authoritative map for export and rendering."""
        camera_robot = self.robots.get(self._camera_robot_id())
        if camera_robot is not None and camera_robot.local_map is not None:
            return camera_robot.local_map
        active = self.robots.get(self.mission.active_robot)
        return active.local_map if active else None

    def compute_metrics(self) -> dict:
        union = set()
        per_robot = {}
        cell_area = self.config.coverage_cell ** 2
        for rid, robot in self.robots.items():
            union |= robot.coverage_cells
            per_robot[rid] = {
                "distance_m": round(robot.distance_travelled, 3),
                "area_m2": len(robot.coverage_cells) * cell_area,
            }
        return {
            "duration_min": round(self.time / 60.0, 4),
            "robots": per_robot,
            "area_union_m2": len(union) * cell_area,
            "collisions": self.collision_count,
        }


def compute_metrics(log: list[dict]) -> dict:
    """Table-I style metrics recomputed from a mission log alone."""
    poses: dict[str, list[tuple[float, float, float]]] = {}
    t_min, t_max = math.inf, -math.inf
    metric_record = None
    for rec in log:
        t_min = min(t_min, rec["t"])
        t_max = max(t_max, rec["t"])
        if rec["kind"] == "pose":
            poses.setdefault(rec["robot"], []).append((rec["t"], rec["x"], rec["y"]))
        elif rec["kind"] == "metric":
            metric_record = rec
    robots = {}
    for rid, track in poses.items():
        dist = sum(
            math.hypot(x2 - x1, y2 - y1)
            for (_, x1, y1), (_, x2, y2) in zip(track, track[1:])
        )
        area = 0.0
        if metric_record is not None:
            area = metric_record.get("areas", {}).get(rid, 0.0)
        robots[rid] = {"distance_m": round(dist, 3), "area_m2": area}
    return {
        "duration_min": round((t_max - t_min) / 60.0, 4) if poses else 0.0,
        "robots": robots,
        "area_union_m2": metric_record.get("area_union", 0.0) if metric_record else 0.0,
    }


def _point_segment_distance(
    x: float, y: float, a: tuple[float, float], b: tuple[float, float]
) -> float:
    ax, ay = a
    bx, by = b
    ex, ey = bx - ax, by - ay
    length_sq = ex * ex + ey * ey
    t = ((x - ax) * ex + (y - ay) * ey) / length_sq
    t = max(0.0, min(1.0, t))
    return math.hypot(x - (ax + t * ex), y - (ay + t * ey))
