/**
 * DashboardSession: the dashboard's single stateful object.
 *
 * Owns one persistent stream connection (subscriptions are
 * multiplexed by run id), the alignment knob vector with debounced
 * optimistic updates, and the rolling PL buffer. Reconnects resume
 * from the last seen sequence number, so a dropped connection shows a
 * stale banner but never duplicates or loses rendered points.
 *
 * The session holds no ground truth: a fresh session pointed at the
 * same service reconstructs every plot from replayed frames.
 */

import {
  ALIGNMENT_STREAM,
  FrameLog,
  StreamFrame,
  RunStatusPayload,
  SweepPointPayload,
  isAck,
  isTerminal,
  parseFrame,
  subscribeOp,
  unsubscribeOp,
} from "./protocol.js";
import {
  AlignmentBody,
  AlignmentKnobs,
  HealthBody,
  ResultBody,
  RunRequest,
  RunStartedBody,
  ValidationBody,
  DiagramBody,
} from "./models.js";

export interface SocketLike {
  send(data: string): void;
  close(): void;
  onopen: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
}

export type SocketFactory = (url: string) => SocketLike;
export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export type ConnectionState = "idle" | "connecting" | "live" | "stale";

export type StartOutcome =
  | { ok: true; runId: string }
  | { ok: false; busy: true; message: string }
  | { ok: false; busy: false; message: string; validation: ValidationBody | null };

export interface SweepPoint {
  index: number;
  axis: number;
  signal: number;
  reference: number | null;
}

export interface PlPoint {
  seq: number;
  ts: number;
  rateHz: number;
  signal: number;
}

export interface RunView {
  runId: string;
  status: string;
  kind: string;
  nPoints: number;
  derived: Record<string, number>;
  error: string | null;
  points: SweepPoint[];
  log: FrameLog;
}

interface Watch {
  streamId: string;
  log: FrameLog;
  onFrame: (frame: StreamFrame) => void;
}

export interface SessionOptions {
  sockets?: SocketFactory;
  fetchFn?: FetchLike;
  debounceMs?: number;
  reconnectMs?: number;
  plBufferSize?: number;
}

const KNOB_NAMES: (keyof AlignmentKnobs)[] = [
  "x_um", "y_um", "z_um", "magnet_angle_deg", "antenna_coupling",
];

export class DashboardSession {
  readonly baseUrl: string;
  connectionState: ConnectionState = "idle";
  knobs: AlignmentKnobs = {
    x_um: 0, y_um: 0, z_um: 0, magnet_angle_deg: 0, antenna_coupling: 1,
  };
  expectedPlRateHz = 0;
  plPoints: PlPoint[] = [];

  private readonly sockets: SocketFactory;
  private readonly fetchFn: FetchLike;
  private readonly debounceMs: number;
  private readonly reconnectMs: number;
  private readonly plBufferSize: number;
  private socket: SocketLike | null = null;
  private watches = new Map<string, Watch>();
  private pendingKnobs: Partial<AlignmentKnobs> = {};
  private knobTimer: ReturnType<typeof setTimeout> | null = null;
  private knobFlight: Promise<AlignmentBody | null> = Promise.resolve(null);
  private stateListeners: ((state: ConnectionState) => void)[] = [];
  private closed = false;

  constructor(baseUrl: string, options: SessionOptions = {}) {
    this.baseUrl = baseUrl.replace(/\/$/, "");
    this.sockets = options.sockets ?? defaultSocketFactory;
    this.fetchFn = options.fetchFn ?? ((url, init) => fetch(url, init));
    this.debounceMs = options.debounceMs ?? 50;
    this.reconnectMs = options.reconnectMs ?? 250;
    this.plBufferSize = options.plBufferSize ?? 600;
  }

  onStateChange(listener: (state: ConnectionState) => void): void {
    this.stateListeners.push(listener);
  }

  // -- HTTP ---------------------------------------------------------------

  private async json<T>(path: string, init?: RequestInit): Promise<T> {
    const resp = await this.fetchFn(this.baseUrl + path, init);
    if (!resp.ok) throw new Error(`${path}: ${resp.status}`);
    return (await resp.json()) as T;
  }

  health(): Promise<HealthBody> {
    return this.json<HealthBody>("/health");
  }

  /** Start a run; validation and busy rejections come back as outcomes. */
  async startRun(request: RunRequest): Promise<StartOutcome> {
    const resp = await this.fetchFn(this.baseUrl + "/runs", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(request),
    });
    if (resp.status === 202) {
      const body = (await resp.json()) as RunStartedBody;
      return { ok: true, runId: body.run_id };
    }
    const body = (await resp.json()) as Record<string, unknown>;
    if (resp.status === 409) {
      const message = typeof body["error"] === "string"
        ? (body["error"] as string)
        : "instrument busy";
      return { ok: false, busy: true, message: `${message} - wait for the current run or stop alignment` };
    }
    if (typeof body["summary"] === "string") {
      const validation = body as unknown as ValidationBody;
      return { ok: false, busy: false, message: validation.summary, validation };
    }
    const message = typeof body["error"] === "string" ? (body["error"] as string) : `rejected (${resp.status})`;
    return { ok: false, busy: false, message, validation: null };
  }

  fetchResult(runId: string): Promise<ResultBody> {
    return this.json<ResultBody>(`/runs/${runId}/result`);
  }

  /** The persisted result document, byte-for-byte. */
  async fetchResultText(runId: string): Promise<string> {
    const resp = await this.fetchFn(`${this.baseUrl}/runs/${runId}/result?format=text`);
    if (!resp.ok) throw new Error(`result text: ${resp.status}`);
    return resp.text();
  }

  fetchDiagram(kind: string, config: string | Record<string, unknown>,
               labels = "names"): Promise<DiagramBody> {
    return this.json<DiagramBody>("/diagram", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ kind, config, labels }),
    });
  }

  // -- Alignment knobs ----------------------------------------------------

  /** Optimistic knob edit; the POST is debounced and merged. */
  setKnob(name: keyof AlignmentKnobs, value: number): void {
    this.knobs[name] = value;
    this.pendingKnobs[name] = value;
    if (this.knobTimer !== null) clearTimeout(this.knobTimer);
    this.knobTimer = setTimeout(() => {
      void this.flushKnobs();
    }, this.debounceMs);
  }

  /** Send pending knob edits now; resolves with the reconciled state. */
  flushKnobs(): Promise<AlignmentBody | null> {
    if (this.knobTimer !== null) {
      clearTimeout(this.knobTimer);
      this.knobTimer = null;
    }
    const pending = this.pendingKnobs;
    if (Object.keys(pending).length === 0) return this.knobFlight;
    this.pendingKnobs = {};
    // serialize posts so reconciliation applies in order
    this.knobFlight = this.knobFlight.then(async () => {
      const body = await this.json<AlignmentBody>("/alignment", {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify(pending),
      });
      this.reconcile(body);
      return body;
    });
    return this.knobFlight;
  }

  private reconcile(body: AlignmentBody): void {
    // the service answer is authoritative, except for knobs edited
    // after this request went out (those are still pending)
    for (const name of KNOB_NAMES) {
      if (!(name in this.pendingKnobs)) this.knobs[name] = body[name];
    }
    this.expectedPlRateHz = body.expected_pl_rate_hz;
  }

  async fetchAlignment(): Promise<AlignmentBody> {
    const body = await this.json<AlignmentBody>("/alignment");
    this.reconcile(body);
    return body;
  }

  async startAlignment(options: { interval_s?: number; window_ns?: number } = {}):
      Promise<AlignmentBody> {
    const body = await this.json<AlignmentBody>("/alignment/start", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(options),
    });
    this.reconcile(body);
    return body;
  }

  async stopAlignment(): Promise<AlignmentBody> {
    const body = await this.json<AlignmentBody>("/alignment/stop", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({}),
    });
    this.reconcile(body);
    return body;
  }

  // -- Streaming ----------------------------------------------------------

  /**
   * Subscribe to the alignment stream. Frames land in the rolling
   * plPoints buffer; sequence numbers restart with every
   * /alignment/start, so the log is reset here.
   */
  watchAlignment(onPoint?: (point: PlPoint) => void): () => void {
    this.plPoints = [];
    const log = new FrameLog();
    const watch: Watch = {
      streamId: ALIGNMENT_STREAM,
      log,
      onFrame: (frame) => {
        if (frame.kind !== "pl-point") return;
        const payload = frame.payload as unknown as SweepPointPayload;
        const point: PlPoint = {
          seq: frame.seq,
          ts: frame.ts,
          rateHz: payload.rate_hz ?? 0,
          signal: payload.signal,
        };
        this.plPoints.push(point);
        if (this.plPoints.length > this.plBufferSize) this.plPoints.shift();
        onPoint?.(point);
      },
    };
    this.addWatch(watch);
    return () => this.removeWatch(ALIGNMENT_STREAM);
  }

  /** Follow a run to completion, accumulating its sweep points. */
  watchRun(runId: string,
           onPoint?: (point: SweepPoint) => void): Promise<RunView> {
    return new Promise((resolve, reject) => {
      const log = new FrameLog();
      const points = new Map<number, SweepPoint>();
      const watch: Watch = {
        streamId: runId,
        log,
        onFrame: (frame) => {
          if (frame.kind === "run-status") {
            if (!isTerminal(frame)) return;
            const payload = frame.payload as unknown as RunStatusPayload;
            this.removeWatch(runId);
            resolve({
              runId,
              status: payload.status,
              kind: payload.kind,
              nPoints: payload.n_points,
              derived: payload.derived,
              error: payload.error,
              points: [...points.values()].sort((a, b) => a.index - b.index),
              log,
            });
            return;
          }
          const payload = frame.payload as unknown as SweepPointPayload;
          if (typeof payload.index !== "number") return;
          const point: SweepPoint = {
            index: payload.index,
            axis: payload.axis,
            signal: payload.signal,
            reference: payload.reference ?? null,
          };
          points.set(point.index, point);
          onPoint?.(point);
        },
      };
      try {
        this.addWatch(watch);
      } catch (err) {
        reject(err);
      }
    });
  }

  close(): void {
    this.closed = true;
    if (this.knobTimer !== null) {
      clearTimeout(this.knobTimer);
      this.knobTimer = null;
    }
    this.pendingKnobs = {};
    this.watches.clear();
    this.socket?.close();
    this.socket = null;
    this.setState("idle");
  }

  private addWatch(watch: Watch): void {
    if (this.watches.has(watch.streamId)) {
      throw new Error(`already watching ${watch.streamId}`);
    }
    this.watches.set(watch.streamId, watch);
    if (this.socket === null) {
      this.connect();
    } else if (this.connectionState === "live") {
      this.socket.send(subscribeOp(watch.streamId, watch.log.lastSeq));
    }
  }

  private removeWatch(streamId: string): void {
    if (!this.watches.delete(streamId)) return;
    if (this.connectionState === "live") {
      this.socket?.send(unsubscribeOp(streamId));
    }
  }

  private connect(): void {
    if (this.closed) return;
    this.setState(this.connectionState === "idle" ? "connecting" : "stale");
    const wsUrl = this.baseUrl.replace(/^http/, "ws") + "/stream";
    const socket = this.sockets(wsUrl);
    this.socket = socket;
    socket.onopen = () => {
      this.setState("live");
      // resume every active watch from its last seen frame
      for (const watch of this.watches.values()) {
        socket.send(subscribeOp(watch.streamId, watch.log.lastSeq));
      }
    };
    socket.onmessage = (ev) => this.dispatch(String(ev.data));
    socket.onerror = () => { /* close follows */ };
    socket.onclose = () => {
      if (this.socket !== socket) return;
      this.socket = null;
      if (this.closed || this.watches.size === 0) {
        this.setState("idle");
        return;
      }
      this.setState("stale");
      setTimeout(() => {
        if (!this.closed && this.socket === null && this.watches.size > 0) {
          this.connect();
        }
      }, this.reconnectMs);
    };
  }

  private dispatch(text: string): void {
    const frame = parseFrame(text);
    if (isAck(frame) || frame.kind === "pong" || frame.kind === "error") return;
    const watch = this.watches.get(frame.run_id);
    if (watch === undefined) return;
    // stale frames (replay overlap) must not re-render
    if (watch.log.accept(frame) === "stale") return;
    watch.onFrame(frame);
  }

  private setState(state: ConnectionState): void {
    if (this.connectionState === state) return;
    this.connectionState = state;
    for (const listener of this.stateListeners) listener(state);
  }
}

function defaultSocketFactory(url: string): SocketLike {
  const ctor = (globalThis as { WebSocket?: new (url: string) => SocketLike }).WebSocket;
  if (ctor === undefined) {
    throw new Error("no WebSocket in this environment; pass options.sockets");
  }
  return new ctor(url);
}
