/** Console loop closure against a live simulator gateway.
 *
 * Spawns `inspectsim run --serve`, connects the real Session/CommandSender
 * stack over a websocket, and checks the full operator loop: driving moves
 * the selected robot and grows the rendered map, the mission advances
 * through the map hand-off via a relocalization click, and a gateway drop
 * disables the drive controls within a second.
 */

import { spawn, type ChildProcess } from "node:child_process";
import { mkdtempSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { WebSocket } from "ws";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { CommandSender } from "../src/input.js";
import { advancePhaseFrame, startTransferFrame } from "../src/protocol.js";
import { Session, type SocketLike } from "../src/session.js";

const PORT = 8700 + Math.floor(Math.random() * 1000);
const SPEED = 2; // sim seconds per wall second

// Enclosed 40 x 40 site with interior feature walls so scan matching has
// structure in both axes. The first robot maps; the second carries the
// camera and becomes the indoor robot after the hand-off.
const SCENARIO = {
  seed: 3,
  base_position: [10, 10],
  world: {
    bounds: [0, 0, 40, 40],
    segments: [
      { a: [0, 0], b: [40, 0] },
      { a: [40, 0], b: [40, 40] },
      { a: [40, 40], b: [0, 40] },
      { a: [0, 40], b: [0, 0] },
      { a: [20, 0], b: [20, 8] },
      { a: [5, 15], b: [15, 15] },
      { a: [28, 20], b: [36, 20] },
    ],
  },
  robots: [
    {
      robot_id: "mapper",
      start: [10, 10, 0],
      odom_sigma_xy: 0,
      odom_sigma_theta: 0,
      lidar: { range_noise_sigma: 0 },
    },
    {
      robot_id: "scout",
      start: [12, 10, 0],
      odom_sigma_xy: 0,
      odom_sigma_theta: 0,
      lidar: { range_noise_sigma: 0 },
      camera: { fov: 0.6 },
    },
  ],
};

function sleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}

async function waitFor(
  what: string,
  predicate: () => boolean,
  timeoutMs = 30000,
): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    if (predicate()) {
      return;
    }
    await sleep(20);
  }
  throw new Error(`timed out waiting for ${what}`);
}

describe("console against a live gateway", () => {
  let server: ChildProcess;
  let session: Session;
  let sender: CommandSender;

  beforeAll(async () => {
    const dir = mkdtempSync(join(tmpdir(), "console-it-"));
    const scenarioPath = join(dir, "scenario.json");
    writeFileSync(scenarioPath, JSON.stringify(SCENARIO));

    server = spawn(
      "python3",
      [
        "-m",
        "inspectsim.cli",
        "run",
        scenarioPath,
        "--serve",
        `127.0.0.1:${PORT}`,
        "--speed",
        String(SPEED),
      ],
      { stdio: ["ignore", "pipe", "inherit"] },
    );
    let listening = false;
    server.stdout!.on("data", (chunk: Buffer) => {
      if (chunk.toString().includes("gateway listening")) {
        listening = true;
      }
    });
    await waitFor("gateway to listen", () => listening);

    session = new Session(
      `ws://127.0.0.1:${PORT}`,
      (url) => new WebSocket(url) as unknown as SocketLike,
    );
    sender = new CommandSender((frame) => session.send(frame), session.state);
    session.connect();
    await waitFor("first snapshot", () => !session.state.isStale(Date.now()));
  }, 60000);

  afterAll(() => {
    session?.close();
    server?.kill("SIGKILL");
  });

  it(
    "drives, hands off the map, relocalizes, and goes inert on disconnect",
    async () => {
      const state = session.state;
      expect(state.phase).toBe("OutdoorMapping");
      expect(Object.keys(state.robots).sort()).toEqual(["mapper", "scout"]);

      // --- scripted drive input moves the robot and the map grows ---------
      sender.selectRobot("mapper", Date.now());
      sender.setMode("manual", Date.now());
      await waitFor("manual mode", () => state.robots.mapper.mode === "manual");

      const startX = state.robots.mapper.estimate!.x;
      const startPoints = state.pointCount();
      expect(startPoints).toBeGreaterThan(0); // the mapper scans from t=0

      sender.press({ v: 1, turn: 0 }, Date.now());
      const driveUntil = Date.now() + (8000 / SPEED); // 8 sim seconds
      while (Date.now() < driveUntil) {
        sender.tick(Date.now());
        await sleep(40);
      }
      sender.release(Date.now());

      const driven = state.robots.mapper.estimate!.x - startX;
      expect(driven).toBeGreaterThan(4); // held input really moved it
      expect(state.pointCount()).toBeGreaterThan(startPoints);

      // --- map hand-off: transfer, then a relocalization click ------------
      session.send(advancePhaseFrame());
      await waitFor("MapTransfer", () => state.phase === "MapTransfer");

      session.send(startTransferFrame("mapper", "scout"));
      await waitFor("AwaitRelocalize", () => state.phase === "AwaitRelocalize", 60000);
      expect(state.activeRobot).toBe("scout");

      // map frame is anchored at the mapper's start pose, so the scout's
      // true pose in it is its world offset from that start: (2, 0, 0)
      sender.selectRobot("scout", Date.now());
      expect(state.relocEnabled(Date.now())).toBe(true);
      expect(sender.relocGuess(2, 0, 0, Date.now())).toBe(true);
      await waitFor("IndoorInspection", () => state.phase === "IndoorInspection");
      expect(state.relocEnabled(Date.now())).toBe(false);

      // --- disconnect disables the drive controls within a second ---------
      expect(state.driveEnabled(Date.now())).toBe(true);
      const killedAt = Date.now();
      server.kill("SIGKILL");
      await waitFor("drive disabled", () => !state.driveEnabled(Date.now()), 2000);
      expect(Date.now() - killedAt).toBeLessThan(1000);
    },
    120000,
  );
});
