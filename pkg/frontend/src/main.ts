/** Browser bootstrap: wires the session, input, and renderer to the DOM. */

import { CommandSender } from "./input.js";
import {
  advancePhaseFrame,
  setCameraPanFrame,
  startTransferFrame,
} from "./protocol.js";
import {
  drawScene,
  linkBarFraction,
  pan,
  robotColor,
  screenToWorld,
  zoomAt,
  type Viewport,
} from "./renderer.js";
import { Session, type SocketLike } from "./session.js";

const params = new URLSearchParams(window.location.search);
const gatewayUrl = params.get("gateway") ?? "ws://127.0.0.1:8765";

const canvas = document.getElementById("map") as HTMLCanvasElement;
const ctx = canvas.getContext("2d")!;
const statusEl = document.getElementById("status")!;
const phaseEl = document.getElementById("phase")!;
const robotsEl = document.getElementById("robots")!;
const modesEl = document.getElementById("modes")!;
const linksEl = document.getElementById("links")!;
const transferEl = document.getElementById("transfer")!;
const eventsEl = document.getElementById("events")!;
const panSlider = document.getElementById("camera-pan") as HTMLInputElement;

const session = new Session(gatewayUrl, (url) => new WebSocket(url) as unknown as SocketLike);
const state = session.state;
const sender = new CommandSender((frame) => session.send(frame), state);

let viewport: Viewport = { scale: 12, offsetX: 60, offsetY: canvas.height - 60 };
const overlays = { annotations: true, trajectories: true, scan: true, links: true };
for (const key of Object.keys(overlays) as (keyof typeof overlays)[]) {
  const box = document.getElementById(`overlay-${key}`) as HTMLInputElement;
  box.checked = overlays[key];
  box.addEventListener("change", () => {
    overlays[key] = box.checked;
  });
}
const MODES = ["idle", "manual", "gap_assist", "repeat"];

// -- keyboard teleop ----------------------------------------------------------

const heldKeys = new Set<string>();
const KEY_AXES: Record<string, [number, number]> = {
  ArrowUp: [1, 0],
  ArrowDown: [-1, 0],
  ArrowLeft: [0, 1],
  ArrowRight: [0, -1],
  w: [1, 0],
  s: [-1, 0],
  a: [0, 1],
  d: [0, -1],
};

function currentAxes(): [number, number] {
  let v = 0;
  let turn = 0;
  for (const key of heldKeys) {
    const axes = KEY_AXES[key];
    if (axes !== undefined) {
      v += axes[0];
      turn += axes[1];
    }
  }
  return [Math.max(-1, Math.min(1, v)), Math.max(-1, Math.min(1, turn))];
}

window.addEventListener("keydown", (event) => {
  if (!(event.key in KEY_AXES) || event.repeat) {
    return;
  }
  heldKeys.add(event.key);
  const [v, turn] = currentAxes();
  sender.press({ v, turn }, Date.now());
});

window.addEventListener("keyup", (event) => {
  if (!(event.key in KEY_AXES)) {
    return;
  }
  heldKeys.delete(event.key);
  if (heldKeys.size === 0) {
    sender.release(Date.now());
  } else {
    const [v, turn] = currentAxes();
    sender.press({ v, turn }, Date.now());
  }
});

// -- map interaction: pan/zoom and the relocalization click-drag --------------

let dragging: { sx: number; sy: number; relocStart: [number, number] | null } | null = null;

canvas.addEventListener("mousedown", (event) => {
  const reloc = state.relocEnabled(Date.now());
  dragging = {
    sx: event.offsetX,
    sy: event.offsetY,
    relocStart: reloc ? screenToWorld(viewport, event.offsetX, event.offsetY) : null,
  };
});

canvas.addEventListener("mousemove", (event) => {
  if (dragging === null || dragging.relocStart !== null) {
    return;
  }
  viewport = pan(viewport, event.offsetX - dragging.sx, event.offsetY - dragging.sy);
  dragging.sx = event.offsetX;
  dragging.sy = event.offsetY;
});

canvas.addEventListener("mouseup", (event) => {
  if (dragging === null) {
    return;
  }
  const start = dragging.relocStart;
  dragging = null;
  if (start === null) {
    return;
  }
  // click sets the position, the drag direction sets the heading
  const [wx, wy] = start;
  const [ex, ey] = screenToWorld(viewport, event.offsetX, event.offsetY);
  const theta = Math.hypot(ex - wx, ey - wy) > 0.3 ? Math.atan2(ey - wy, ex - wx) : 0;
  if (sender.relocGuess(wx, wy, theta, Date.now())) {
    pushEvent(`relocalization guess sent (${wx.toFixed(1)}, ${wy.toFixed(1)})`);
    // success shows up as a phase change; report a rejection so the
    // operator knows to click again
    window.setTimeout(() => {
      if (state.phase === "AwaitRelocalize") {
        pushEvent("relocalization guess rejected — adjust and retry");
      }
    }, 2000);
  }
});

canvas.addEventListener("wheel", (event) => {
  event.preventDefault();
  viewport = zoomAt(viewport, event.offsetX, event.offsetY, event.deltaY < 0 ? 1.15 : 1 / 1.15);
});

panSlider.addEventListener("input", () => {
  if (state.selectedRobot !== null) {
    session.send(setCameraPanFrame(state.selectedRobot, Number(panSlider.value)));
  }
});

document.getElementById("advance-phase")!.addEventListener("click", () => {
  session.send(advancePhaseFrame());
});

document.getElementById("start-transfer")!.addEventListener("click", () => {
  if (state.selectedRobot !== null && state.activeRobot !== "") {
    session.send(startTransferFrame(state.selectedRobot, state.activeRobot));
  }
});

// -- side panels --------------------------------------------------------------

function pushEvent(text: string): void {
  const line = document.createElement("div");
  line.textContent = `[${state.simTime.toFixed(1)}s] ${text}`;
  eventsEl.prepend(line);
  while (eventsEl.childElementCount > 30) {
    eventsEl.lastElementChild!.remove();
  }
}

session.onFrame = (frame) => {
  if (frame.type === "error") {
    pushEvent(`error: ${frame.payload.reason}`);
  } else if (frame.type === "event" && "ack" in frame.payload) {
    // quiet: acks are routine
  } else if (frame.type === "snapshot") {
    for (const d of frame.payload.detections) {
      pushEvent(`${d.robot} detection (gray ${d.mean_gray}, ${d.points} points)`);
    }
  }
};

function renderPanels(now: number): void {
  const stale = state.isStale(now);
  statusEl.textContent = state.connected
    ? stale
      ? "connected (stale)"
      : "connected"
    : "disconnected";
  statusEl.className = state.connected && !stale ? "ok" : "bad";
  phaseEl.textContent = `${state.phase || "—"}  t=${state.simTime.toFixed(1)}s  collisions=${state.collisions}`;

  robotsEl.replaceChildren(
    ...Object.entries(state.robots).map(([robotId, robot]) => {
      const button = document.createElement("button");
      const est = robot.estimate;
      button.textContent = `${robotId} [${robot.mode}]${est ? ` (${est.x.toFixed(1)}, ${est.y.toFixed(1)})` : ""}`;
      button.style.borderColor = robotColor(robotId);
      button.className = robotId === state.selectedRobot ? "selected" : "";
      button.onclick = () => sender.selectRobot(robotId, Date.now());
      return button;
    }),
  );

  modesEl.replaceChildren(
    ...MODES.map((mode) => {
      const button = document.createElement("button");
      button.textContent = mode;
      button.disabled = stale;
      button.onclick = () => sender.setMode(mode, Date.now());
      return button;
    }),
  );

  linksEl.replaceChildren(
    ...state.links.map((link) => {
      const row = document.createElement("div");
      row.className = "link-row";
      const bar = document.createElement("div");
      bar.className = `link-bar ${link.up ? "up" : "down"}`;
      bar.style.width = `${Math.round(linkBarFraction(link.loss, link.budget) * 100)}%`;
      const label = document.createElement("span");
      label.textContent = `${link.a}↔${link.b} ${link.loss.toFixed(0)}/${link.budget.toFixed(0)} dB`;
      row.append(bar, label);
      return row;
    }),
  );

  transferEl.textContent =
    state.transfer === null
      ? ""
      : `transfer ${state.transfer.state}: ${state.transfer.acked}/${state.transfer.total} chunks`;
}

let lastPhase = "";

function frameLoop(): void {
  const now = Date.now();
  if (state.phase !== lastPhase && state.phase !== "") {
    lastPhase = state.phase;
    pushEvent(`phase: ${state.phase}`);
  }
  sender.tick(now);
  drawScene(ctx, state, viewport, overlays);
  renderPanels(now);
  requestAnimationFrame(frameLoop);
}

session.connect();
requestAnimationFrame(frameLoop);
