// Drag-to-force and key-hold flag input.
//
// While the pointer is held, the drag vector is measured from the TOOL's
// screen position (not the mousedown point) and emitted as a pixel force
// vector on a fixed timer, at least 30 Hz.  Release emits a single zero
// vector.  Holding the flag key emits flag_down once on press and flag_up
// on release.

import type { Command } from "./protocol.js";

export const FORCE_SEND_HZ = 50;
export const FLAG_KEY = "Space";

export interface InputOptions {
  send: (cmd: Command) => void;
  toolScreenPos: () => [number, number];
  maxForcePx: number; // drag length clamp, px
  enabled?: () => boolean;
}

export class InputController {
  private readonly opts: InputOptions;
  private pointer: [number, number] | null = null;
  private dragging = false;
  private flagHeld = false;
  private timer: ReturnType<typeof setInterval> | null = null;

  constructor(opts: InputOptions) {
    this.opts = opts;
  }

  attach(target: EventTarget): void {
    target.addEventListener("mousedown", this.onDown as EventListener);
    target.addEventListener("mousemove", this.onMove as EventListener);
    target.addEventListener("mouseup", this.onUp as EventListener);
    target.addEventListener("keydown", this.onKeyDown as EventListener);
    target.addEventListener("keyup", this.onKeyUp as EventListener);
  }

  detach(target: EventTarget): void {
    target.removeEventListener("mousedown", this.onDown as EventListener);
    target.removeEventListener("mousemove", this.onMove as EventListener);
    target.removeEventListener("mouseup", this.onUp as EventListener);
    target.removeEventListener("keydown", this.onKeyDown as EventListener);
    target.removeEventListener("keyup", this.onKeyUp as EventListener);
    this.stopTimer();
  }

  get isDragging(): boolean {
    return this.dragging;
  }

  currentForce(): [number, number] {
    if (!this.dragging || this.pointer === null) return [0, 0];
    const [tx, ty] = this.opts.toolScreenPos();
    let dx = this.pointer[0] - tx;
    // canvas y grows downward; force y is up
    let dy = ty - this.pointer[1];
    const len = Math.hypot(dx, dy);
    if (len > this.opts.maxForcePx) {
      dx *= this.opts.maxForcePx / len;
      dy *= this.opts.maxForcePx / len;
    }
    return [dx, dy];
  }

  private readonly onDown = (ev: MouseEvent): void => {
    if (this.opts.enabled && !this.opts.enabled()) return;
    this.dragging = true;
    this.pointer = [ev.offsetX, ev.offsetY];
    this.sendForce();
    this.startTimer();
  };

  private readonly onMove = (ev: MouseEvent): void => {
    if (!this.dragging) return;
    this.pointer = [ev.offsetX, ev.offsetY];
  };

  private readonly onUp = (): void => {
    if (!this.dragging) return;
    this.dragging = false;
    this.pointer = null;
    this.stopTimer();
    this.opts.send({ type: "force", fx: 0, fy: 0 });
  };

  private readonly onKeyDown = (ev: KeyboardEvent): void => {
    if (ev.code !== FLAG_KEY || this.flagHeld) return;
    if (this.opts.enabled && !this.opts.enabled()) return;
    this.flagHeld = true;
    this.opts.send({ type: "flag_down" });
  };

  private readonly onKeyUp = (ev: KeyboardEvent): void => {
    if (ev.code !== FLAG_KEY || !this.flagHeld) return;
    this.flagHeld = false;
    this.opts.send({ type: "flag_up" });
  };

  private sendForce(): void {
    const [fx, fy] = this.currentForce();
    this.opts.send({ type: "force", fx, fy });
  }

  private startTimer(): void {
    this.stopTimer();
    this.timer = setInterval(() => this.sendForce(), 1000 / FORCE_SEND_HZ);
  }

  private stopTimer(): void {
    if (this.timer !== null) {
      clearInterval(this.timer);
      this.timer = null;
    }
  }
}
