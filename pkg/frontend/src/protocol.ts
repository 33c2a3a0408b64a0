/** Wire protocol types and frame encoding for the gateway (v1).
 *
 * The JSON schema is the only contract with the simulator; see
 * ../../docs/wire_protocol.md. Everything rendered by the console traces
 * back to a field defined here.
 */

export interface PoseEstimate {
  x: number;
  y: number;
  theta: number;
}

export interface ScanView {
  angles: number[];
  ranges: number[];
  hits: boolean[];
}

export interface RobotView {
  estimate: PoseEstimate | null;
  mode: string;
  camera_pan: number;
  scan: ScanView | null;
}

/** One incremental map update: points arrive exactly once per client. */
export interface MapDelta {
  reset: boolean;
  frame: string;
  voxel: number;
  points: [number, number, number][]; // x, y, descriptor
  annotations: [number, string, number][]; // point index, level, distance
}

export interface LinkView {
  a: string;
  b: string;
  loss: number;
  up: boolean;
  budget: number;
}

export interface TransferView {
  acked: number;
  total: number;
  state: string;
}

export interface DetectionView {
  robot: string;
  mean_gray: number;
  points: number;
}

export interface Snapshot {
  sim_time: number;
  phase: string;
  active_robot: string;
  robots: Record<string, RobotView>;
  map: MapDelta | null;
  links: LinkView[];
  transfer: TransferView | null;
  detections: DetectionView[];
  collisions: number;
}

export type ServerFrame =
  | { type: "snapshot"; payload: Snapshot }
  | { type: "event"; payload: Record<string, unknown> }
  | { type: "error"; payload: { reason: string; cmd?: string } };

export function parseServerFrame(text: string): ServerFrame {
  let raw: unknown;
  try {
    raw = JSON.parse(text);
  } catch {
    throw new Error("server frame is not valid JSON");
  }
  if (typeof raw !== "object" || raw === null) {
    throw new Error("server frame must be an object");
  }
  const frame = raw as { type?: unknown; payload?: unknown };
  if (
    frame.type !== "snapshot" &&
    frame.type !== "event" &&
    frame.type !== "error"
  ) {
    throw new Error(`unknown server frame type ${String(frame.type)}`);
  }
  if (typeof frame.payload !== "object" || frame.payload === null) {
    throw new Error("server frame payload must be an object");
  }
  return frame as ServerFrame;
}

// -- client frames ------------------------------------------------------------

function clientFrame(
  type: string,
  robotId: string | null,
  payload: Record<string, unknown>,
): string {
  const frame: Record<string, unknown> = { type, payload };
  if (robotId !== null) {
    frame.robot_id = robotId;
  }
  return JSON.stringify(frame);
}

export function cmdVelFrame(
  robotId: string,
  v: number,
  omega: number,
  goalHeading?: number,
): string {
  const payload: Record<string, unknown> = { v, omega };
  if (goalHeading !== undefined) {
    payload.goal_heading = goalHeading;
  }
  return clientFrame("cmd_vel", robotId, payload);
}

export function setModeFrame(robotId: string, mode: string): string {
  return clientFrame("set_mode", robotId, { mode });
}

export function setCameraPanFrame(robotId: string, pan: number): string {
  return clientFrame("set_camera_pan", robotId, { pan });
}

export function relocGuessFrame(
  robotId: string,
  x: number,
  y: number,
  theta: number,
): string {
  return clientFrame("reloc_guess", robotId, { x, y, theta });
}

export function startTransferFrame(robotId: string, to: string): string {
  return clientFrame("start_transfer", robotId, { to });
}

export function advancePhaseFrame(): string {
  return clientFrame("advance_phase", null, {});
}

export function abortFrame(): string {
  return clientFrame("abort", null, {});
}
