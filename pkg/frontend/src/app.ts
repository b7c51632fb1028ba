// UI assembly: canvas + controls wired to the service client.

import { ServiceClient } from "./client.js";
import { InputController } from "./input.js";
import { drawFrame, fitViewport, toScreen, Viewport } from "./renderer.js";
import { Frame, isFrame, ServerEvent } from "./protocol.js";

export interface App {
  client: ServiceClient;
  input: InputController;
  canvas: HTMLCanvasElement;
  banner: HTMLElement;
  lastFrame: Frame | null;
  destroy(): void;
}

const MAX_FORCE_N = 30; // same clamp as the oracle corrector
const DEFAULT_FORCE_SCALE = 0.05; // N per px, must match the server flag

export function createApp(
  root: HTMLElement,
  client: ServiceClient,
  forceScale: number = DEFAULT_FORCE_SCALE,
): App {
  const canvas = root.ownerDocument.createElement("canvas");
  canvas.width = 640;
  canvas.height = 480;
  canvas.tabIndex = 0;
  root.appendChild(canvas);

  const banner = root.ownerDocument.createElement("div");
  banner.className = "banner";
  root.appendChild(banner);

  const controls = root.ownerDocument.createElement("div");
  controls.className = "controls";
  root.appendChild(controls);

  const vp: Viewport = fitViewport(canvas.width, canvas.height);
  const state = {
    lastFrame: null as Frame | null,
    mode: "OnPolicyDelta" as "OnPolicyDelta" | "TakeOver",
  };

  const button = (label: string, onClick: () => void): HTMLButtonElement => {
    const b = root.ownerDocument.createElement("button");
    b.textContent = label;
    b.addEventListener("click", onClick);
    controls.appendChild(b);
    return b;
  };

  button("start", () => client.send({ type: "start" }));
  button("save", () => client.send({ type: "end", save: true }));
  button("discard", () => client.send({ type: "end", save: false }));
  const modeButton = button("mode: OnPolicyDelta", () => {
    state.mode = state.mode === "OnPolicyDelta" ? "TakeOver" : "OnPolicyDelta";
    modeButton.textContent = `mode: ${state.mode}`;
    client.send({ type: "set_mode", mode: state.mode });
  });

  const input = new InputController({
    send: (cmd) => client.send(cmd),
    toolScreenPos: () => {
      const tool = state.lastFrame?.tool ?? [0.1, 0.1, 0];
      return toScreen(vp, tool[0], tool[1]);
    },
    maxForcePx: MAX_FORCE_N / forceScale,
    enabled: () => client.connected,
  });
  input.attach(canvas);

  const setBanner = (): void => {
    if (!client.connected) {
      banner.textContent = "disconnected - input disabled";
      banner.setAttribute("data-state", "disconnected");
    } else {
      const f = state.lastFrame;
      banner.textContent = f
        ? `${f.episode_id || "idle"} stage ${f.stage}/3`
        : "connected";
      banner.setAttribute("data-state", "connected");
    }
  };

  client.onStateChange = setBanner;
  let ctx: CanvasRenderingContext2D | null = null;
  try {
    ctx = canvas.getContext("2d");
  } catch {
    ctx = null; // headless DOM without 2D canvas support
  }

  client.onEvent = (msg: ServerEvent) => {
    if (!isFrame(msg)) return;
    state.lastFrame = msg;
    if (ctx) drawFrame(ctx, vp, msg);
    setBanner();
  };
  setBanner();

  return {
    client,
    input,
    canvas,
    banner,
    get lastFrame() {
      return state.lastFrame;
    },
    destroy() {
      input.detach(canvas);
      client.close();
    },
  };
}
