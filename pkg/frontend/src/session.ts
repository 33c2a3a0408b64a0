/** Gateway session: one websocket, reconnect with backoff.
 *
 * The socket constructor is injected so tests (and the node integration
 * harness) can supply `ws` while the browser uses the native WebSocket.
 */

import { parseServerFrame, type ServerFrame } from "./protocol.js";
import { ConsoleState } from "./state.js";

export interface SocketLike {
  send(data: string): void;
  close(): void;
  onopen: (() => void) | null;
  onclose: (() => void) | null;
  onerror: (() => void) | null;
  onmessage: ((event: { data: unknown }) => void) | null;
}

export type SocketFactory = (url: string) => SocketLike;

const BACKOFF_START_MS = 500;
const BACKOFF_MAX_MS = 5000;

export class Session {
  readonly state = new ConsoleState();
  onFrame: ((frame: ServerFrame) => void) | null = null;
  private socket: SocketLike | null = null;
  private backoffMs = BACKOFF_START_MS;
  private closed = false;

  constructor(
    private readonly url: string,
    private readonly makeSocket: SocketFactory,
    private readonly now: () => number = () => Date.now(),
    private readonly schedule: (fn: () => void, ms: number) => void = (fn, ms) => {
      setTimeout(fn, ms);
    },
  ) {}

  connect(): void {
    if (this.closed) {
      return;
    }
    const socket = this.makeSocket(this.url);
    this.socket = socket;
    socket.onopen = () => {
      this.backoffMs = BACKOFF_START_MS;
      this.state.markConnected();
    };
    socket.onmessage = (event) => {
      let frame: ServerFrame;
      try {
        frame = parseServerFrame(String(event.data));
      } catch {
        return; // tolerate garbage; the next frame resynchronizes
      }
      if (frame.type === "snapshot") {
        this.state.applySnapshot(frame.payload, this.now());
      }
      if (this.onFrame !== null) {
        this.onFrame(frame);
      }
    };
    const dropped = () => {
      if (this.socket !== socket) {
        return;
      }
      this.socket = null;
      this.state.markDisconnected();
      if (!this.closed) {
        this.schedule(() => this.connect(), this.backoffMs);
        this.backoffMs = Math.min(BACKOFF_MAX_MS, this.backoffMs * 2);
      }
    };
    socket.onclose = dropped;
    socket.onerror = dropped;
  }

  /** Send a frame; silently dropped (never buffered stale) when offline. */
  send(frame: string): void {
    if (this.socket === null || !this.state.connected) {
      return;
    }
    try {
      this.socket.send(frame);
    } catch {
      // the close handler will mark the disconnect
    }
  }

  close(): void {
    this.closed = true;
    if (this.socket !== null) {
      this.socket.close();
      this.socket = null;
    }
    this.state.markDisconnected();
  }
}
