// Canvas renderer for streamed frames.  World coordinates are meters in
// roughly [0, 0.4] x [0, 0.3]; the view maps them to the canvas with y up.

import type { Frame, Primitive } from "./protocol.js";

export interface Viewport {
  width: number;
  height: number;
  scale: number; // px per meter
  originX: number; // px of world x = 0
  originY: number; // px of world y = 0 (canvas y grows downward)
}

export function fitViewport(width: number, height: number): Viewport {
  const scale = Math.min(width / 0.45, height / 0.35);
  return { width, height, scale, originX: 0.05 * scale, originY: height - 0.03 * scale };
}

export function toScreen(vp: Viewport, x: number, y: number): [number, number] {
  return [vp.originX + x * vp.scale, vp.originY - y * vp.scale];
}

export function toWorldVector(vp: Viewport, dx: number, dy: number): [number, number] {
  return [dx / vp.scale, -dy / vp.scale];
}

const COLORS: Record<string, string> = {
  shelf: "#444",
  wall: "#444",
  board: "#444",
  slab: "#b5651d",
  slot1: "#2a7",
  slot2: "#2a7",
  tool: "#146",
  force: "#d22",
};

export function drawFrame(
  ctx: CanvasRenderingContext2D,
  vp: Viewport,
  frame: Frame,
): void {
  ctx.clearRect(0, 0, vp.width, vp.height);
  for (const prim of frame.primitives) {
    drawPrimitive(ctx, vp, prim);
  }
  drawHud(ctx, vp, frame);
}

function drawPrimitive(
  ctx: CanvasRenderingContext2D,
  vp: Viewport,
  prim: Primitive,
): void {
  const color = "name" in prim && prim.name ? COLORS[prim.name] ?? "#888" : "#888";
  if (prim.kind === "segment") {
    const [ax, ay] = toScreen(vp, prim.a[0], prim.a[1]);
    const [bx, by] = toScreen(vp, prim.b[0], prim.b[1]);
    ctx.strokeStyle = color;
    ctx.lineWidth = 2;
    ctx.beginPath();
    ctx.moveTo(ax, ay);
    ctx.lineTo(bx, by);
    ctx.stroke();
  } else if (prim.kind === "polygon") {
    ctx.fillStyle = color;
    ctx.beginPath();
    prim.points.forEach(([x, y], i) => {
      const [sx, sy] = toScreen(vp, x, y);
      if (i === 0) ctx.moveTo(sx, sy);
      else ctx.lineTo(sx, sy);
    });
    ctx.closePath();
    ctx.fill();
  } else if (prim.kind === "arrow") {
    const [ax, ay] = toScreen(vp, prim.a[0], prim.a[1]);
    const tip: [number, number] = [
      ax + prim.v[0] * vp.scale,
      ay - prim.v[1] * vp.scale,
    ];
    ctx.strokeStyle = color;
    ctx.lineWidth = 2;
    ctx.beginPath();
    ctx.moveTo(ax, ay);
    ctx.lineTo(tip[0], tip[1]);
    ctx.stroke();
  } else if (prim.kind === "banner") {
    ctx.fillStyle = "#222";
    ctx.font = "14px sans-serif";
    ctx.fillText(prim.text, 8, 18);
  }
}

function drawHud(
  ctx: CanvasRenderingContext2D,
  vp: Viewport,
  frame: Frame,
): void {
  ctx.fillStyle = frame.correction ? "#d22" : "#777";
  ctx.font = "12px sans-serif";
  const flag = frame.correction ? "CORRECTING" : "autonomous";
  ctx.fillText(`${frame.mode}  ${flag}  t=${frame.time.toFixed(2)}s`, 8, vp.height - 8);
  if (frame.outcome) {
    ctx.fillStyle = frame.outcome === "success" ? "#2a7" : "#d22";
    ctx.font = "16px sans-serif";
    ctx.fillText(frame.outcome, 8, 40);
  }
  // human force echo as an arrow anchored at the tool
  const [hx, hy] = frame.human;
  if (hx !== 0 || hy !== 0) {
    const [tx, ty] = toScreen(vp, frame.tool[0], frame.tool[1]);
    ctx.strokeStyle = "#f80";
    ctx.lineWidth = 2;
    ctx.beginPath();
    ctx.moveTo(tx, ty);
    ctx.lineTo(tx + hx * 4, ty - hy * 4);
    ctx.stroke();
  }
}
