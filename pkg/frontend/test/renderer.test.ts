import { describe, expect, it, vi } from "vitest";

import { drawFrame, fitViewport, toScreen, toWorldVector } from "../src/renderer.js";
import { RecordingContext, sampleFrame } from "./fixtures.js";

describe("viewport mapping", () => {
  it("maps world origin to the configured screen origin", () => {
    const vp = fitViewport(640, 480);
    const [x, y] = toScreen(vp, 0, 0);
    expect(x).toBeCloseTo(vp.originX);
    expect(y).toBeCloseTo(vp.originY);
  });

  it("y grows upward in world space", () => {
    const vp = fitViewport(640, 480);
    const [, low] = toScreen(vp, 0.1, 0.0);
    const [, high] = toScreen(vp, 0.1, 0.2);
    expect(high).toBeLessThan(low);
  });

  it("round-trips screen vectors to world vectors", () => {
    const vp = fitViewport(640, 480);
    const [wx, wy] = toWorldVector(vp, vp.scale * 0.05, -vp.scale * 0.02);
    expect(wx).toBeCloseTo(0.05);
    expect(wy).toBeCloseTo(0.02);
  });
});

describe("frame rendering", () => {
  it("renders a recorded frame stream without console errors", () => {
    const errors = vi.spyOn(console, "error");
    const vp = fitViewport(640, 480);
    const ctx = new RecordingContext();
    for (let tick = 0; tick < 100; tick++) {
      drawFrame(ctx as unknown as CanvasRenderingContext2D, vp, sampleFrame(tick));
    }
    expect(errors).not.toHaveBeenCalled();
    expect(ctx.ops.filter((op) => op === "clearRect")).toHaveLength(100);
    expect(ctx.ops).toContain("fill"); // polygons drawn
    expect(ctx.ops).toContain("stroke"); // segments and arrows drawn
    errors.mockRestore();
  });

  it("draws the stage banner text", () => {
    const vp = fitViewport(640, 480);
    const ctx = new RecordingContext();
    drawFrame(ctx as unknown as CanvasRenderingContext2D, vp, sampleFrame(0));
    expect(ctx.ops).toContain("fillText:flip stage 1/3");
  });

  it("shows the outcome when the episode ends", () => {
    const vp = fitViewport(640, 480);
    const ctx = new RecordingContext();
    drawFrame(
      ctx as unknown as CanvasRenderingContext2D,
      vp,
      sampleFrame(5, { outcome: "success" }),
    );
    expect(ctx.ops).toContain("fillText:success");
  });

  it("draws a human force echo arrow when force is nonzero", () => {
    const vp = fitViewport(640, 480);
    const ctx = new RecordingContext();
    const quiet = sampleFrame(0);
    drawFrame(ctx as unknown as CanvasRenderingContext2D, vp, quiet);
    const quietStrokes = ctx.ops.filter((op) => op === "stroke").length;
    const ctx2 = new RecordingContext();
    drawFrame(
      ctx2 as unknown as CanvasRenderingContext2D,
      vp,
      sampleFrame(0, { human: [5, -2, 0, 0, 0, 0] }),
    );
    const loudStrokes = ctx2.ops.filter((op) => op === "stroke").length;
    expect(loudStrokes).toBe(quietStrokes + 1);
  });
});
