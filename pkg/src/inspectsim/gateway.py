"""Websocket gateway: live console sessions against the running simulation.

One asyncio task owns the simulation loop; client commands funnel through
a queue and are applied between steps, so the single-writer rule holds.
Snapshots fan out per client at 10 Hz of sim time, each client with its
own incremental map stream.
"""

from __future__ import annotations

import asyncio
import json
from typing import Optional

from websockets.asyncio.server import serve

from .fleet import CommandRejected, OperatorCommand, Simulation
from .scenario import Scenario
from .station import SNAPSHOT_PERIOD, SnapshotStream

PROTOCOL_VERSION = 1

_FRAME_TO_COMMAND = {
    "cmd_vel": "velocity",
    "set_mode": "set_mode",
    "set_camera_pan": "set_camera_pan",
    "reloc_guess": "relocalize_guess",
    "start_transfer": "start_transfer",
    "advance_phase": "advance_phase",
    "abort": "abort",
}


def parse_frame(text: str) -> OperatorCommand:
    """Decode one client frame into an operator command.

    Raises ValueError on malformed frames; the caller answers with an
    error frame and keeps the connection.
    """
    try:
        frame = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValueError(f"invalid JSON: {exc}") from exc
    if not isinstance(frame, dict) or "type" not in frame:
        raise ValueError("frame must be an object with a 'type' field")
    kind = _FRAME_TO_COMMAND.get(frame["type"])
    if kind is None:
        raise ValueError(f"unknown frame type {frame['type']!r}")
    payload = frame.get("payload") or {}
    if not isinstance(payload, dict):
        raise ValueError("payload must be an object")
    return OperatorCommand(kind=kind, robot_id=frame.get("robot_id"), data=payload)


class Gateway:
    def __init__(self, scenario: Scenario, seed: Optional[int] = None,
                 speed: Optional[float] = 1.0):
        """speed=1.0 paces sim time to wall clock; None runs flat out."""
        self.sim: Simulation = scenario.build(seed=seed)
        self.speed = speed
        self._commands: asyncio.Queue = asyncio.Queue()
        self._clients: dict = {}  # connection -> SnapshotStream
        self._next_snapshot = 0.0

    async def _sim_loop(self):
        dt = self.sim.config.dt
        while True:
            while not self._commands.empty():
                connection, cmd = self._commands.get_nowait()
                try:
                    self.sim.handle_command(cmd)
                    await self._safe_send(
                        connection,
                        {"type": "event", "payload": {"ack": cmd.kind}},
                    )
                except CommandRejected as exc:
                    await self._safe_send(
                        connection,
                        {"type": "error", "payload": {"reason": exc.reason, "cmd": cmd.kind}},
                    )
            self.sim.step()
            if self.sim.time + 1e-9 >= self._next_snapshot:
                self._next_snapshot += SNAPSHOT_PERIOD
                await self._broadcast_snapshots()
            if self.speed:
                await asyncio.sleep(dt / self.speed)
            else:
                await asyncio.sleep(0)

    async def _broadcast_snapshots(self):
        for connection in list(self._clients):
            stream = self._clients[connection]
            await self._safe_send(
                connection, {"type": "snapshot", "payload": stream.snapshot()}
            )

    async def _safe_send(self, connection, frame: dict):
        try:
            await connection.send(json.dumps(frame))
        except Exception:
            self._clients.pop(connection, None)

    async def handler(self, connection):
        stream = SnapshotStream(self.sim)
        self._clients[connection] = stream
        await self._safe_send(
            connection,
            {"type": "event", "payload": {"hello": True, "protocol": PROTOCOL_VERSION}},
        )
        await self._safe_send(connection, {"type": "snapshot", "payload": stream.snapshot()})
        try:
            async for message in connection:
                try:
                    cmd = parse_frame(message)
                except ValueError as exc:
                    await self._safe_send(
                        connection, {"type": "error", "payload": {"reason": str(exc)}}
                    )
                    continue
                await self._commands.put((connection, cmd))
        finally:
            self._clients.pop(connection, None)

    async def serve(self, host: str = "127.0.0.1", port: int = 8765):
        loop_task = asyncio.create_task(self._sim_loop())
        try:
            async with serve(self.handler, host, port) as server:
                print(f"gateway listening on ws://{host}:{port}", flush=True)
                await server.serve_forever()
        finally:
            loop_task.cancel()


def run_gateway(scenario: Scenario, host: str = "127.0.0.1", port: int = 8765,
                seed: Optional[int] = None, speed: Optional[float] = 1.0):
    gateway = Gateway(scenario, seed=seed, speed=speed)
    asyncio.run(gateway.serve(host, port))
