import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";

import { InputController } from "../src/input.js";
import type { Command } from "../src/protocol.js";

function mouse(type: string, x: number, y: number): MouseEvent {
  const ev = new MouseEvent(type, { bubbles: true });
  Object.defineProperty(ev, "offsetX", { value: x });
  Object.defineProperty(ev, "offsetY", { value: y });
  return ev;
}

function key(type: string, code: string): KeyboardEvent {
  return new KeyboardEvent(type, { code, bubbles: true });
}

describe("drag to force", () => {
  let sent: Command[];
  let canvas: HTMLCanvasElement;
  let input: InputController;

  beforeEach(() => {
    vi.useFakeTimers();
    sent = [];
    canvas = document.createElement("canvas");
    document.body.appendChild(canvas);
    input = new InputController({
      send: (cmd) => sent.push(cmd),
      toolScreenPos: () => [100, 100],
      maxForcePx: 600,
    });
    input.attach(canvas);
  });

  afterEach(() => {
    input.detach(canvas);
    canvas.remove();
    vi.useRealTimers();
  });

  it("emits force messages at 30 Hz or better while held", () => {
    canvas.dispatchEvent(mouse("mousedown", 150, 100));
    vi.advanceTimersByTime(1000);
    const forces = sent.filter((c) => c.type === "force");
    expect(forces.length).toBeGreaterThanOrEqual(30);
  });

  it("measures the vector from the tool position, not the drag origin", () => {
    canvas.dispatchEvent(mouse("mousedown", 180, 60));
    const first = sent[0];
    expect(first.type).toBe("force");
    if (first.type === "force") {
      expect(first.fx).toBe(80); // 180 - 100
      expect(first.fy).toBe(40); // screen y up: 100 - 60
    }
  });

  it("tracks pointer movement during the drag", () => {
    canvas.dispatchEvent(mouse("mousedown", 100, 100));
    canvas.dispatchEvent(mouse("mousemove", 160, 100));
    vi.advanceTimersByTime(40);
    const last = sent[sent.length - 1];
    if (last.type === "force") {
      expect(last.fx).toBe(60);
    } else {
      throw new Error("expected a force message");
    }
  });

  it("clamps the drag length", () => {
    canvas.dispatchEvent(mouse("mousedown", 100 + 5000, 100));
    const first = sent[0];
    if (first.type === "force") {
      expect(Math.hypot(first.fx, first.fy)).toBeCloseTo(600);
    } else {
      throw new Error("expected a force message");
    }
  });

  it("emits a single zero force on release and stops the timer", () => {
    canvas.dispatchEvent(mouse("mousedown", 150, 100));
    vi.advanceTimersByTime(100);
    canvas.dispatchEvent(mouse("mouseup", 150, 100));
    const atRelease = sent.length;
    const last = sent[sent.length - 1];
    expect(last).toEqual({ type: "force", fx: 0, fy: 0 });
    vi.advanceTimersByTime(500);
    expect(sent.length).toBe(atRelease);
  });

  it("respects the enabled gate", () => {
    const gated: Command[] = [];
    const off = new InputController({
      send: (cmd) => gated.push(cmd),
      toolScreenPos: () => [0, 0],
      maxForcePx: 600,
      enabled: () => false,
    });
    off.attach(canvas);
    canvas.dispatchEvent(mouse("mousedown", 50, 50));
    vi.advanceTimersByTime(200);
    expect(gated).toHaveLength(0);
    off.detach(canvas);
  });
});

describe("flag key", () => {
  it("sends flag_down once on press and flag_up on release", () => {
    const sent: Command[] = [];
    const canvas = document.createElement("canvas");
    const input = new InputController({
      send: (cmd) => sent.push(cmd),
      toolScreenPos: () => [0, 0],
      maxForcePx: 600,
    });
    input.attach(canvas);
    canvas.dispatchEvent(key("keydown", "Space"));
    canvas.dispatchEvent(key("keydown", "Space")); // auto-repeat
    canvas.dispatchEvent(key("keyup", "Space"));
    canvas.dispatchEvent(key("keydown", "KeyX")); // unrelated key
    expect(sent).toEqual([{ type: "flag_down" }, { type: "flag_up" }]);
    input.detach(canvas);
  });
});
