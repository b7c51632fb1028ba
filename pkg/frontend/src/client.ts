// Thin websocket wrapper with connection-state tracking.
//
// On drop the UI shows a disconnected banner and disables input; the
// client retries with a fixed backoff.  Commands carry a client timestamp
// that is monotone non-decreasing.

import type { Command, ServerEvent } from "./protocol.js";

export type ConnectionState = "connecting" | "open" | "closed";

export interface WebSocketLike {
  send(data: string): void;
  close(): void;
  onopen: ((ev?: unknown) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: string }) => void) | null;
}

export interface ClientOptions {
  url: string;
  makeSocket?: (url: string) => WebSocketLike;
  retryMs?: number;
  now?: () => number;
}

export class ServiceClient {
  readonly url: string;
  state: ConnectionState = "closed";
  onEvent: ((msg: ServerEvent) => void) | null = null;
  onStateChange: ((state: ConnectionState) => void) | null = null;

  private socket: WebSocketLike | null = null;
  private readonly makeSocket: (url: string) => WebSocketLike;
  private readonly retryMs: number;
  private readonly now: () => number;
  private lastStamp = -Infinity;
  private retryTimer: ReturnType<typeof setTimeout> | null = null;
  private stopped = false;

  constructor(opts: ClientOptions) {
    this.url = opts.url;
    this.makeSocket = opts.makeSocket ?? ((url) => new WebSocket(url) as unknown as WebSocketLike);
    this.retryMs = opts.retryMs ?? 1000;
    this.now = opts.now ?? (() => Date.now());
  }

  connect(): void {
    this.stopped = false;
    this.setState("connecting");
    const sock = this.makeSocket(this.url);
    this.socket = sock;
    sock.onopen = () => this.setState("open");
    sock.onclose = () => {
      this.socket = null;
      this.setState("closed");
      if (!this.stopped) {
        this.retryTimer = setTimeout(() => this.connect(), this.retryMs);
      }
    };
    sock.onmessage = (ev) => {
      let msg: ServerEvent;
      try {
        msg = JSON.parse(ev.data) as ServerEvent;
      } catch {
        return;
      }
      this.onEvent?.(msg);
    };
  }

  close(): void {
    this.stopped = true;
    if (this.retryTimer !== null) clearTimeout(this.retryTimer);
    this.socket?.close();
  }

  get connected(): boolean {
    return this.state === "open";
  }

  send(cmd: Command): boolean {
    if (this.state !== "open" || this.socket === null) return false;
    const stamp = Math.max(this.now(), this.lastStamp);
    this.lastStamp = stamp;
    this.socket.send(JSON.stringify({ ...cmd, stamp }));
    return true;
  }

  private setState(state: ConnectionState): void {
    if (state === this.state) return;
    this.state = state;
    this.onStateChange?.(state);
  }
}
