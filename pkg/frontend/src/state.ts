/** Console view state: the single source of truth for rendering and gating.
 *
 * Snapshots are applied on the main loop; map deltas accumulate into flat
 * arrays (points never move, matching the simulator's accumulate-only
 * map). Nothing here touches the DOM, so the whole class is unit-testable
 * with a fake clock.
 */

import type {
  DetectionView,
  LinkView,
  MapDelta,
  RobotView,
  Snapshot,
  TransferView,
} from "./protocol.js";

export const STALE_AFTER_MS = 1000;

export interface Annotation {
  level: string;
  distance: number;
}

export class ConsoleState {
  connected = false;
  lastSnapshotAt: number | null = null;

  simTime = 0;
  phase = "";
  activeRobot = "";
  selectedRobot: string | null = null;
  robots: Record<string, RobotView> = {};
  links: LinkView[] = [];
  transfer: TransferView | null = null;
  collisions = 0;
  recentDetections: DetectionView[] = [];

  trails: Record<string, [number, number][]> = {};

  mapFrame = "";
  mapVoxel = 0;
  mapXs: number[] = [];
  mapYs: number[] = [];
  mapDescriptors: number[] = [];
  annotations = new Map<number, Annotation>();

  markConnected(): void {
    this.connected = true;
  }

  /** Socket closed or errored: drive controls must go inert immediately. */
  markDisconnected(): void {
    this.connected = false;
    this.lastSnapshotAt = null;
  }

  applySnapshot(snapshot: Snapshot, nowMs: number): void {
    this.lastSnapshotAt = nowMs;
    this.simTime = snapshot.sim_time;
    this.phase = snapshot.phase;
    this.activeRobot = snapshot.active_robot;
    this.robots = snapshot.robots;
    this.links = snapshot.links;
    this.transfer = snapshot.transfer;
    this.collisions = snapshot.collisions;
    this.recentDetections = snapshot.detections;
    if (this.selectedRobot === null || !(this.selectedRobot in snapshot.robots)) {
      this.selectedRobot = snapshot.active_robot;
    }
    for (const [robotId, robot] of Object.entries(snapshot.robots)) {
      if (robot.estimate === null) {
        continue;
      }
      const trail = (this.trails[robotId] ??= []);
      const last = trail[trail.length - 1];
      if (
        last === undefined ||
        Math.hypot(robot.estimate.x - last[0], robot.estimate.y - last[1]) > 0.05
      ) {
        trail.push([robot.estimate.x, robot.estimate.y]);
      }
    }
    if (snapshot.map !== null) {
      this.applyMapDelta(snapshot.map);
    }
  }

  private applyMapDelta(delta: MapDelta): void {
    if (delta.reset) {
      this.mapXs = [];
      this.mapYs = [];
      this.mapDescriptors = [];
      this.annotations.clear();
    }
    this.mapFrame = delta.frame;
    this.mapVoxel = delta.voxel;
    for (const [x, y, descriptor] of delta.points) {
      this.mapXs.push(x);
      this.mapYs.push(y);
      this.mapDescriptors.push(descriptor);
    }
    for (const [index, level, distance] of delta.annotations) {
      this.annotations.set(index, { level, distance });
    }
  }

  pointCount(): number {
    return this.mapXs.length;
  }

  /** True when no snapshot arrived within the staleness window. */
  isStale(nowMs: number): boolean {
    if (!this.connected || this.lastSnapshotAt === null) {
      return true;
    }
    return nowMs - this.lastSnapshotAt > STALE_AFTER_MS;
  }

  /** Drive input is only honored against live, fresh data. */
  driveEnabled(nowMs: number): boolean {
    return !this.isStale(nowMs) && this.selectedRobot !== null;
  }

  /** The relocalization click target is only offered in AwaitRelocalize. */
  relocEnabled(nowMs: number): boolean {
    return !this.isStale(nowMs) && this.phase === "AwaitRelocalize";
  }

  selected(): RobotView | null {
    if (this.selectedRobot === null) {
      return null;
    }
    return this.robots[this.selectedRobot] ?? null;
  }
}
