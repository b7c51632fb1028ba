// Message schema shared with the correction service websocket.

export type PrimitiveKind = "segment" | "polygon" | "arrow" | "banner";

export interface SegmentPrimitive {
  kind: "segment";
  a: [number, number];
  b: [number, number];
  name?: string;
}

export interface PolygonPrimitive {
  kind: "polygon";
  points: [number, number][];
  name?: string;
}

export interface ArrowPrimitive {
  kind: "arrow";
  a: [number, number];
  v: [number, number];
  name?: string;
}

export interface BannerPrimitive {
  kind: "banner";
  text: string;
  stage: number;
}

export type Primitive =
  | SegmentPrimitive
  | PolygonPrimitive
  | ArrowPrimitive
  | BannerPrimitive;

export interface Frame {
  type: "frame";
  tick: number;
  time: number;
  episode_id: string;
  mode: string;
  stage: number;
  correction: boolean;
  recording: boolean;
  tool: [number, number, number];
  measured: number[];
  human: number[];
  primitives: Primitive[];
  outcome: string | null;
}

export type ServerEvent = Frame | { type: string; [key: string]: unknown };

export type Command =
  | { type: "force"; fx: number; fy: number }
  | { type: "flag_down" }
  | { type: "flag_up" }
  | { type: "start"; scenario_id?: string; seed?: number }
  | { type: "end"; save: boolean }
  | { type: "set_mode"; mode: "OnPolicyDelta" | "TakeOver" };

export function isFrame(msg: ServerEvent): msg is Frame {
  return msg.type === "frame";
}
