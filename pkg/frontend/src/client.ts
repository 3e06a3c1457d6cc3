// Session client: WebSocket stream with reconnect/backoff, stale-frame
// detection, and an acked command path.  Controls must never fire without a
// live ack path, so send() hard-fails when the link is down.

import { AckFrame, Command, Frame, StateFrame, parseFrame } from "./protocol.js";

export interface SocketLike {
  send(data: string): void;
  close(): void;
  onopen: ((ev?: unknown) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: string }) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
}

export type SocketFactory = (url: string) => SocketLike;

export type LinkState = "connecting" | "connected" | "disconnected";

export interface ClientOptions {
  socketFactory: SocketFactory;
  now?: () => number;
  setTimer?: (fn: () => void, ms: number) => unknown;
  clearTimer?: (handle: unknown) => void;
  staleAfterMs?: number;
  backoffMs?: number[];
}

export class SessionClient {
  state: LinkState = "disconnected";
  lastFrame: StateFrame | null = null;
  lastFrameAt = -Infinity;
  onFrame: ((f: StateFrame) => void) | null = null;
  onAck: ((f: AckFrame) => void) | null = null;
  onState: ((s: LinkState) => void) | null = null;

  private url = "";
  private ws: SocketLike | null = null;
  private attempts = 0;
  private closed = false;
  private reconnectHandle: unknown = null;
  private readonly opts: Required<ClientOptions>;

  constructor(options: ClientOptions) {
    this.opts = {
      now: () => Date.now(),
      setTimer: (fn, ms) => setTimeout(fn, ms),
      clearTimer: (h) => clearTimeout(h as number),
      staleAfterMs: 1000,
      backoffMs: [250, 500, 1000, 2000, 5000],
      ...options,
    };
  }

  connect(url: string): void {
    this.url = url;
    this.closed = false;
    this.open();
  }

  private open(): void {
    this.setState("connecting");
    const ws = this.opts.socketFactory(this.url);
    this.ws = ws;
    ws.onopen = () => {
      this.attempts = 0;
      this.setState("connected");
    };
    ws.onmessage = (ev) => {
      const frame = parseFrame(ev.data);
      if (!frame) return;
      if (frame.type === "state") {
        this.lastFrame = frame;
        this.lastFrameAt = this.opts.now();
        this.onFrame?.(frame);
      } else {
        this.onAck?.(frame);
      }
    };
    ws.onclose = () => this.dropped();
    ws.onerror = () => this.dropped();
  }

  private dropped(): void {
    if (this.ws) {
      this.ws.onclose = null;
      this.ws.onerror = null;
      this.ws = null;
    }
    if (this.closed) {
      this.setState("disconnected");
      return;
    }
    this.setState("disconnected");
    const delay =
      this.opts.backoffMs[Math.min(this.attempts, this.opts.backoffMs.length - 1)];
    this.attempts += 1;
    this.reconnectHandle = this.opts.setTimer(() => this.open(), delay);
  }

  close(): void {
    this.closed = true;
    if (this.reconnectHandle !== null) this.opts.clearTimer(this.reconnectHandle);
    this.ws?.close();
    this.ws = null;
    this.setState("disconnected");
  }

  stale(): boolean {
    return this.opts.now() - this.lastFrameAt > this.opts.staleAfterMs;
  }

  // Controls stay enabled only with a live, fresh link (and a running sim for
  // maneuver commands; pause/resume work while paused).
  controlsEnabled(): boolean {
    return this.state === "connected" && !this.stale();
  }

  send(cmd: Command): void {
    if (!this.controlsEnabled() || !this.ws) {
      throw new Error("link is down: command not sent");
    }
    this.ws.send(JSON.stringify(cmd));
  }

  private setState(s: LinkState): void {
    if (s !== this.state) {
      this.state = s;
      this.onState?.(s);
    }
  }
}
