/** Operator input mapped to command frames.
 *
 * Held drive input emits cmd_vel at 10 Hz (the gateway-side watchdog
 * halts the robot 0.5 s after the last command, so a held key must keep
 * refreshing). Release sends a single zero-velocity frame; switching the
 * selected robot mid-drive zeroes the old robot first. In gap_assist mode
 * the steering keys set the goal heading instead of a raw turn rate.
 *
 * All timing is injected (`nowMs`) so the cadence is unit-testable.
 */

import { cmdVelFrame, relocGuessFrame, setModeFrame } from "./protocol.js";
import type { ConsoleState } from "./state.js";

export const COMMAND_PERIOD_MS = 100;
export const GAP_GOAL_STEP = Math.PI / 4; // steering key deflection, rad

export interface DriveInput {
  v: number; // forward axis, -1..1
  turn: number; // steering axis, -1..1
}

export class CommandSender {
  private held: DriveInput | null = null;
  private heldRobot: string | null = null;
  private nextEmit = 0;

  constructor(
    private readonly send: (frame: string) => void,
    private readonly state: ConsoleState,
  ) {}

  /** Begin (or update) held drive input. */
  press(input: DriveInput, nowMs: number): void {
    if (!this.state.driveEnabled(nowMs)) {
      return;
    }
    this.held = input;
    this.heldRobot = this.state.selectedRobot;
    this.nextEmit = nowMs;
    this.tick(nowMs);
  }

  /** Release the stick: one explicit zero so the robot stops promptly. */
  release(nowMs: number): void {
    if (this.held === null || this.heldRobot === null) {
      return;
    }
    const robot = this.heldRobot;
    this.held = null;
    this.heldRobot = null;
    this.send(cmdVelFrame(robot, 0, 0));
  }

  /** Call at display rate; emits at the command cadence while held. */
  tick(nowMs: number): void {
    if (this.held === null || this.heldRobot === null) {
      return;
    }
    if (!this.state.driveEnabled(nowMs) || this.state.selectedRobot !== this.heldRobot) {
      // connection went stale or selection changed under us: stop driving
      this.release(nowMs);
      return;
    }
    if (nowMs < this.nextEmit) {
      return;
    }
    this.nextEmit = nowMs + COMMAND_PERIOD_MS;
    const robotView = this.state.selected();
    const { v, turn } = this.held;
    if (robotView !== null && robotView.mode === "gap_assist") {
      this.send(cmdVelFrame(this.heldRobot, v, 0, turn * GAP_GOAL_STEP));
    } else {
      this.send(cmdVelFrame(this.heldRobot, v, turn));
    }
  }

  /** Change the selected robot; a held drive zeroes the old robot first. */
  selectRobot(robotId: string, nowMs: number): void {
    if (this.held !== null) {
      this.release(nowMs);
    }
    this.state.selectedRobot = robotId;
  }

  setMode(mode: string, nowMs: number): void {
    if (this.state.selectedRobot === null || this.state.isStale(nowMs)) {
      return;
    }
    this.send(setModeFrame(this.state.selectedRobot, mode));
  }

  /** Map click plus heading drag, gated to the AwaitRelocalize phase. */
  relocGuess(x: number, y: number, theta: number, nowMs: number): boolean {
    if (!this.state.relocEnabled(nowMs) || this.state.selectedRobot === null) {
      return false;
    }
    this.send(relocGuessFrame(this.state.selectedRobot, x, y, theta));
    return true;
  }
}
