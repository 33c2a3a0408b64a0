"""Command-line entry point: run, render, replay, serve."""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

from .scenario import load_scenario
from .world import ScenarioError


def _parse_bind(addr: str) -> tuple[str, int]:
    host, _, port = addr.rpartition(":")
    return (host or "127.0.0.1", int(port))


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="inspectsim")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a scenario headlessly or serve a console gateway")
    p_run.add_argument("scenario", type=Path)
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--headless", action="store_true", default=True)
    p_run.add_argument("--serve", metavar="ADDR", default=None,
                       help="host:port for a live console gateway instead of headless")
    p_run.add_argument("--speed", type=float, default=None,
                       help="live pacing factor (default: flat out when serving)")
    p_run.add_argument("--out", type=Path, default=None)
    p_run.add_argument("--time-cap", type=float, default=600.0)
    p_run.add_argument("--render", action="store_true")

    p_render = sub.add_parser("render", help="render a map export to a raster image")
    p_render.add_argument("map", type=Path)
    p_render.add_argument("--trajectory", type=Path, default=None, metavar="LOG")
    p_render.add_argument("--out", type=Path, default=None)

    p_replay = sub.add_parser("replay", help="re-execute a recorded command log")
    p_replay.add_argument("log", type=Path)
    p_replay.add_argument("--scenario", type=Path, required=True)
    p_replay.add_argument("--seed", type=int, default=None)
    p_replay.add_argument("--out", type=Path, default=None)

    args = parser.parse_args(argv)

    if args.command == "run":
        try:
            scenario = load_scenario(args.scenario)
        except ScenarioError as exc:
            print(f"scenario invalid: {exc}", file=sys.stderr)
            return 1
        if args.serve:
            from .gateway import run_gateway

            host, port = _parse_bind(args.serve)
            run_gateway(scenario, host=host, port=port, seed=args.seed, speed=args.speed)
            return 0
        from .station import run_scenario

        result = run_scenario(
            scenario, seed=args.seed, out_dir=args.out,
            time_cap=args.time_cap, render=args.render,
        )
        metrics = result.sim.compute_metrics()
        print(json.dumps({"phase": result.sim.mission.phase, "metrics": metrics},
                         sort_keys=True))
        if result.reason:
            print(result.reason, file=sys.stderr)
        return result.exit_code

    if args.command == "render":
        from .mapping import import_map
        from .render import render_map, trajectories_from_log
        from .station import replay_log

        map_ = import_map(args.map.read_bytes())
        trajectories = None
        if args.trajectory is not None:
            trajectories = trajectories_from_log(replay_log(args.trajectory))
        image = render_map(map_, trajectories=trajectories)
        out = args.out or args.map.with_suffix(".png")
        image.save(out)
        print(f"wrote {out}")
        return 0

    if args.command == "replay":
        from .station import replay_commands, replay_log

        records = replay_log(args.log)
        sim = replay_commands(args.scenario, records, seed=args.seed)
        digest = hashlib.sha256(
            "\n".join(json.dumps(r, sort_keys=True) for r in sim.log).encode()
        ).hexdigest()
        print(json.dumps({"phase": sim.mission.phase, "records": len(sim.log),
                          "log_sha256": digest}, sort_keys=True))
        if args.out is not None:
            args.out.mkdir(parents=True, exist_ok=True)
            with (args.out / "replay_log.jsonl").open("w") as f:
                for rec in sim.log:
                    f.write(json.dumps(rec, sort_keys=True) + "\n")
        return 0

    return 2


if __name__ == "__main__":
    sys.exit(main())
