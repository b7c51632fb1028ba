import type { Frame, Primitive } from "../src/protocol.js";

export function sampleFrame(tick: number, overrides: Partial<Frame> = {}): Frame {
  const primitives: Primitive[] = [
    { kind: "segment", a: [0, 0], b: [0.28, 0], name: "shelf" },
    { kind: "segment", a: [0.28, 0], b: [0.28, 0.25], name: "wall" },
    {
      kind: "polygon",
      points: [
        [0.28, 0],
        [0.13, 0],
        [0.13, 0.012],
        [0.28, 0.012],
      ],
      name: "slab",
    },
    {
      kind: "polygon",
      points: [
        [0.092, 0.046],
        [0.108, 0.046],
        [0.108, 0.054],
        [0.092, 0.054],
      ],
      name: "tool",
    },
    { kind: "arrow", a: [0.1, 0.05], v: [0.02, 0], name: "force" },
    { kind: "banner", text: "flip stage 1/3", stage: 1 },
  ];
  return {
    type: "frame",
    tick,
    time: tick * 0.02,
    episode_id: "flip-live-0001",
    mode: "OnPolicyDelta",
    stage: 1,
    correction: tick % 2 === 0,
    recording: true,
    tool: [0.1, 0.05, 0],
    measured: [1.5, 0, 0, 0, 0, 0],
    human: [0, 0, 0, 0, 0, 0],
    primitives,
    outcome: null,
    ...overrides,
  };
}

/** Minimal recording CanvasRenderingContext2D stand-in for jsdom. */
export class RecordingContext {
  ops: string[] = [];
  fillStyle = "";
  strokeStyle = "";
  lineWidth = 0;
  font = "";

  clearRect(): void {
    this.ops.push("clearRect");
  }
  beginPath(): void {
    this.ops.push("beginPath");
  }
  closePath(): void {
    this.ops.push("closePath");
  }
  moveTo(): void {
    this.ops.push("moveTo");
  }
  lineTo(): void {
    this.ops.push("lineTo");
  }
  stroke(): void {
    this.ops.push("stroke");
  }
  fill(): void {
    this.ops.push("fill");
  }
  fillText(text: string): void {
    this.ops.push(`fillText:${text}`);
  }
}
