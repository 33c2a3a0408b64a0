import { describe, expect, it } from "vitest";

import type { Snapshot } from "../src/protocol.js";
import { ConsoleState, STALE_AFTER_MS } from "../src/state.js";

function snapshot(overrides: Partial<Snapshot> = {}): Snapshot {
  return {
    sim_time: 0,
    phase: "OutdoorMapping",
    active_robot: "warthog",
    robots: {
      warthog: { estimate: { x: 0, y: 0, theta: 0 }, mode: "manual", camera_pan: 0, scan: null },
      hd2: { estimate: null, mode: "idle", camera_pan: 0, scan: null },
    },
    map: null,
    links: [],
    transfer: null,
    detections: [],
    collisions: 0,
    ...overrides,
  };
}

describe("ConsoleState", () => {
  it("selects the active robot on the first snapshot only", () => {
    const state = new ConsoleState();
    state.markConnected();
    state.applySnapshot(snapshot(), 0);
    expect(state.selectedRobot).toBe("warthog");
    state.selectedRobot = "hd2";
    state.applySnapshot(snapshot(), 100);
    expect(state.selectedRobot).toBe("hd2");
  });

  it("accumulates map deltas and clears on reset", () => {
    const state = new ConsoleState();
    state.markConnected();
    state.applySnapshot(
      snapshot({
        map: {
          reset: true,
          frame: "warthog",
          voxel: 0.1,
          points: [
            [1, 2, 10],
            [3, 4, 20],
          ],
          annotations: [[0, "red", 1.5]],
        },
      }),
      0,
    );
    state.applySnapshot(
      snapshot({
        map: { reset: false, frame: "warthog", voxel: 0.1, points: [[5, 6, 30]], annotations: [] },
      }),
      100,
    );
    expect(state.pointCount()).toBe(3);
    expect(state.mapXs).toEqual([1, 3, 5]);
    expect(state.annotations.get(0)).toEqual({ level: "red", distance: 1.5 });

    // map identity changed on the simulator side: the stream resends from scratch
    state.applySnapshot(
      snapshot({
        map: { reset: true, frame: "warthog", voxel: 0.1, points: [[7, 8, 40]], annotations: [] },
      }),
      200,
    );
    expect(state.pointCount()).toBe(1);
    expect(state.mapXs).toEqual([7]);
    expect(state.annotations.size).toBe(0);
  });

  it("upgrades an annotation in place", () => {
    const state = new ConsoleState();
    state.markConnected();
    const base = {
      reset: true,
      frame: "warthog",
      voxel: 0.1,
      points: [[0, 0, 1]] as [number, number, number][],
      annotations: [[0, "yellow", 4.0]] as [number, string, number][],
    };
    state.applySnapshot(snapshot({ map: base }), 0);
    state.applySnapshot(
      snapshot({
        map: { reset: false, frame: "warthog", voxel: 0.1, points: [], annotations: [[0, "red", 1.0]] },
      }),
      100,
    );
    expect(state.annotations.get(0)).toEqual({ level: "red", distance: 1.0 });
  });

  it("records a trajectory trail per robot as the estimate moves", () => {
    const state = new ConsoleState();
    state.markConnected();
    const at = (x: number) =>
      snapshot({
        robots: {
          warthog: { estimate: { x, y: 0, theta: 0 }, mode: "manual", camera_pan: 0, scan: null },
        },
      });
    state.applySnapshot(at(0), 0);
    state.applySnapshot(at(0.01), 100); // below the spacing threshold
    state.applySnapshot(at(0.5), 200);
    state.applySnapshot(at(1.2), 300);
    expect(state.trails.warthog).toEqual([
      [0, 0],
      [0.5, 0],
      [1.2, 0],
    ]);
  });

  it("goes stale one second after the last snapshot", () => {
    const state = new ConsoleState();
    state.markConnected();
    expect(state.isStale(0)).toBe(true); // connected but no snapshot yet
    state.applySnapshot(snapshot(), 1000);
    expect(state.isStale(1000 + STALE_AFTER_MS)).toBe(false);
    expect(state.isStale(1001 + STALE_AFTER_MS)).toBe(true);
  });

  it("disables drive and reloc on disconnect regardless of snapshot age", () => {
    const state = new ConsoleState();
    state.markConnected();
    state.applySnapshot(snapshot({ phase: "AwaitRelocalize" }), 0);
    expect(state.driveEnabled(10)).toBe(true);
    expect(state.relocEnabled(10)).toBe(true);
    state.markDisconnected();
    expect(state.driveEnabled(20)).toBe(false);
    expect(state.relocEnabled(20)).toBe(false);
  });

  it("gates relocalization to the AwaitRelocalize phase", () => {
    const state = new ConsoleState();
    state.markConnected();
    state.applySnapshot(snapshot({ phase: "OutdoorMapping" }), 0);
    expect(state.relocEnabled(10)).toBe(false);
    state.applySnapshot(snapshot({ phase: "AwaitRelocalize" }), 20);
    expect(state.relocEnabled(30)).toBe(true);
  });
});
