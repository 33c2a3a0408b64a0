/** Canvas map rendering and the view math behind it.
 *
 * The viewport transform and color mapping are pure functions so they can
 * be unit-tested without a DOM; `drawScene` is the only canvas-touching
 * entry point.
 */

import type { ConsoleState } from "./state.js";

export interface Viewport {
  scale: number; // pixels per meter
  offsetX: number; // screen x of world origin
  offsetY: number; // screen y of world origin
}

/** World to screen; y flips so world +y points up on screen. */
export function worldToScreen(vp: Viewport, x: number, y: number): [number, number] {
  return [vp.offsetX + x * vp.scale, vp.offsetY - y * vp.scale];
}

export function screenToWorld(vp: Viewport, sx: number, sy: number): [number, number] {
  return [(sx - vp.offsetX) / vp.scale, (vp.offsetY - sy) / vp.scale];
}

/** Zoom about a fixed screen point (the cursor), keeping it anchored. */
export function zoomAt(vp: Viewport, sx: number, sy: number, factor: number): Viewport {
  const [wx, wy] = screenToWorld(vp, sx, sy);
  const scale = Math.min(400, Math.max(1, vp.scale * factor));
  return {
    scale,
    offsetX: sx - wx * scale,
    offsetY: sy + wy * scale,
  };
}

export function pan(vp: Viewport, dxPixels: number, dyPixels: number): Viewport {
  return { ...vp, offsetX: vp.offsetX + dxPixels, offsetY: vp.offsetY + dyPixels };
}

const LEVEL_COLORS: Record<string, string> = {
  red: "#e03131",
  orange: "#f08c00",
  yellow: "#ffd43b",
};
const NEUTRAL_COLOR = "#adb5bd";

/** Annotation level to display color; unannotated points stay neutral. */
export function levelColor(level: string | null): string {
  if (level !== null && level in LEVEL_COLORS) {
    return LEVEL_COLORS[level];
  }
  return NEUTRAL_COLOR;
}

export const ROBOT_COLORS: Record<string, string> = {
  warthog: "#e8590c",
  hd2: "#1971c2",
};

export function robotColor(robotId: string): string {
  return ROBOT_COLORS[robotId] ?? "#2f9e44";
}

export interface Overlays {
  annotations: boolean;
  trajectories: boolean;
  scan: boolean;
  links: boolean;
}

export function drawScene(
  ctx: CanvasRenderingContext2D,
  state: ConsoleState,
  vp: Viewport,
  overlays: Overlays,
): void {
  const { width, height } = ctx.canvas;
  ctx.fillStyle = "#141517";
  ctx.fillRect(0, 0, width, height);

  // map points, annotated ones on top and larger
  const pointSize = Math.max(1, vp.scale * state.mapVoxel * 0.8);
  ctx.fillStyle = NEUTRAL_COLOR;
  for (let i = 0; i < state.mapXs.length; i++) {
    if (overlays.annotations && state.annotations.has(i)) {
      continue;
    }
    const [sx, sy] = worldToScreen(vp, state.mapXs[i], state.mapYs[i]);
    ctx.fillRect(sx, sy, pointSize, pointSize);
  }
  if (overlays.annotations) {
    for (const [index, ann] of state.annotations) {
      ctx.fillStyle = levelColor(ann.level);
      const [sx, sy] = worldToScreen(vp, state.mapXs[index], state.mapYs[index]);
      ctx.fillRect(sx - 1, sy - 1, pointSize + 2, pointSize + 2);
    }
  }

  if (overlays.trajectories) {
    for (const [robotId, trail] of Object.entries(state.trails)) {
      if (trail.length < 2) {
        continue;
      }
      ctx.strokeStyle = robotColor(robotId);
      ctx.beginPath();
      for (let i = 0; i < trail.length; i++) {
        const [sx, sy] = worldToScreen(vp, trail[i][0], trail[i][1]);
        if (i === 0) {
          ctx.moveTo(sx, sy);
        } else {
          ctx.lineTo(sx, sy);
        }
      }
      ctx.stroke();
    }
  }

  // radio links as polylines between the endpoints we can place on the map
  if (overlays.links) {
    for (const link of state.links) {
      const a = state.robots[link.a]?.estimate;
      const b = state.robots[link.b]?.estimate;
      if (!a || !b) {
        continue;
      }
      ctx.strokeStyle = link.up ? "rgba(43, 138, 62, 0.6)" : "rgba(201, 42, 42, 0.6)";
      ctx.setLineDash([6, 4]);
      ctx.beginPath();
      const [ax, ay] = worldToScreen(vp, a.x, a.y);
      const [bx, by] = worldToScreen(vp, b.x, b.y);
      ctx.moveTo(ax, ay);
      ctx.lineTo(bx, by);
      ctx.stroke();
      ctx.setLineDash([]);
    }
  }

  // robots at their estimated poses (the console never sees ground truth)
  for (const [robotId, robot] of Object.entries(state.robots)) {
    if (robot.estimate === null) {
      continue;
    }
    const { x, y, theta } = robot.estimate;
    const [sx, sy] = worldToScreen(vp, x, y);
    if (overlays.scan && robotId === state.selectedRobot && robot.scan !== null) {
      drawScan(ctx, vp, sx, sy, theta, robot.scan.angles, robot.scan.ranges, robot.scan.hits);
    }
    ctx.fillStyle = robotColor(robotId);
    ctx.beginPath();
    ctx.arc(sx, sy, Math.max(4, vp.scale * 0.3), 0, 2 * Math.PI);
    ctx.fill();
    ctx.strokeStyle = "#ffffff";
    ctx.beginPath();
    ctx.moveTo(sx, sy);
    ctx.lineTo(
      sx + Math.cos(theta) * vp.scale * 0.6,
      sy - Math.sin(theta) * vp.scale * 0.6,
    );
    ctx.stroke();
    if (robotId === state.selectedRobot) {
      ctx.strokeStyle = "#ffffff";
      ctx.beginPath();
      ctx.arc(sx, sy, Math.max(7, vp.scale * 0.45), 0, 2 * Math.PI);
      ctx.stroke();
    }
  }
}

function drawScan(
  ctx: CanvasRenderingContext2D,
  vp: Viewport,
  sx: number,
  sy: number,
  theta: number,
  angles: number[],
  ranges: number[],
  hits: boolean[],
): void {
  ctx.strokeStyle = "rgba(64, 192, 87, 0.25)";
  ctx.beginPath();
  for (let i = 0; i < angles.length; i++) {
    if (!hits[i]) {
      continue;
    }
    const a = theta + angles[i];
    ctx.moveTo(sx, sy);
    ctx.lineTo(
      sx + Math.cos(a) * ranges[i] * vp.scale,
      sy - Math.sin(a) * ranges[i] * vp.scale,
    );
  }
  ctx.stroke();
}

/** Per-link loss bar fill fraction against the budget, clamped to [0, 1]. */
export function linkBarFraction(loss: number, budget: number): number {
  if (budget <= 0) {
    return 1;
  }
  return Math.min(1, Math.max(0, loss / budget));
}
