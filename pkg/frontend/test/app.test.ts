import { afterEach, beforeEach, describe, expect, it } from "vitest";

import { createApp, App } from "../src/app.js";
import { ServiceClient, WebSocketLike } from "../src/client.js";
import { sampleFrame } from "./fixtures.js";

class FakeSocket implements WebSocketLike {
  sent: string[] = [];
  onopen: ((ev?: unknown) => void) | null = null;
  onclose: ((ev?: unknown) => void) | null = null;
  onmessage: ((ev: { data: string }) => void) | null = null;

  send(data: string): void {
    this.sent.push(data);
  }
  close(): void {
    this.onclose?.();
  }
}

describe("app assembly", () => {
  let socket: FakeSocket;
  let client: ServiceClient;
  let root: HTMLElement;
  let app: App;

  beforeEach(() => {
    socket = new FakeSocket();
    client = new ServiceClient({ url: "ws://test", makeSocket: () => socket });
    root = document.createElement("div");
    document.body.appendChild(root);
    app = createApp(root, client);
    client.connect();
  });

  afterEach(() => {
    app.destroy();
    root.remove();
  });

  const sentTypes = (): string[] => socket.sent.map((s) => JSON.parse(s).type as string);

  it("shows a disconnected banner until the socket opens", () => {
    expect(app.banner.getAttribute("data-state")).toBe("disconnected");
    expect(app.banner.textContent).toContain("input disabled");
    socket.onopen?.();
    expect(app.banner.getAttribute("data-state")).toBe("connected");
  });

  it("wires the control buttons to protocol commands", () => {
    socket.onopen?.();
    const buttons = Array.from(root.querySelectorAll("button"));
    const byLabel = (label: string): HTMLButtonElement => {
      const b = buttons.find((x) => x.textContent?.startsWith(label));
      if (!b) throw new Error(`missing button ${label}`);
      return b;
    };
    byLabel("start").click();
    byLabel("save").click();
    byLabel("discard").click();
    expect(sentTypes()).toEqual(["start", "end", "end"]);
    const ends = socket.sent.slice(1).map((s) => JSON.parse(s).save as boolean);
    expect(ends).toEqual([true, false]);
  });

  it("toggles between delta and takeover modes", () => {
    socket.onopen?.();
    const mode = Array.from(root.querySelectorAll("button")).find((b) =>
      b.textContent?.startsWith("mode"),
    );
    if (!mode) throw new Error("missing mode button");
    mode.click();
    expect(mode.textContent).toBe("mode: TakeOver");
    mode.click();
    expect(mode.textContent).toBe("mode: OnPolicyDelta");
    const modes = socket.sent.map((s) => JSON.parse(s).mode as string);
    expect(modes).toEqual(["TakeOver", "OnPolicyDelta"]);
  });

  it("tracks the latest frame and reflects it in the banner", () => {
    socket.onopen?.();
    socket.onmessage?.({ data: JSON.stringify(sampleFrame(7, { stage: 2 })) });
    expect(app.lastFrame?.tick).toBe(7);
    expect(app.banner.textContent).toBe("flip-live-0001 stage 2/3");
  });

  it("ignores non-frame events", () => {
    socket.onopen?.();
    socket.onmessage?.({ data: '{"type":"ack","cmd":"start"}' });
    expect(app.lastFrame).toBeNull();
    expect(app.banner.textContent).toBe("connected");
  });
});
