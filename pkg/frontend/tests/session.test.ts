import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";

import type { AlignmentBody } from "../src/models.js";
import {
  DashboardSession,
  type ConnectionState,
  type SocketLike,
} from "../src/session.js";

class FakeSocket implements SocketLike {
  sent: string[] = [];
  closedByClient = false;
  onopen: ((ev?: unknown) => void) | null = null;
  onmessage: ((ev: { data: unknown }) => void) | null = null;
  onclose: ((ev?: unknown) => void) | null = null;
  onerror: ((ev?: unknown) => void) | null = null;

  constructor(readonly url: string) {}

  send(data: string): void {
    this.sent.push(data);
  }

  close(): void {
    this.closedByClient = true;
    this.onclose?.();
  }

  open(): void {
    this.onopen?.();
  }

  receive(frame: object): void {
    this.onmessage?.({ data: JSON.stringify(frame) });
  }

  dropFromServer(): void {
    this.onclose?.();
  }

  ops(): { op: string; run_id?: string; last_seq?: number }[] {
    return this.sent.map((s) => JSON.parse(s));
  }
}

function alignmentBody(overrides: Partial<AlignmentBody> = {}): AlignmentBody {
  return {
    x_um: 0,
    y_um: 0,
    z_um: 0,
    magnet_angle_deg: 0,
    antenna_coupling: 1,
    beam_waist_um: 2,
    expected_pl_rate_hz: 3e8,
    active: false,
    interval_s: 0.05,
    window_ns: 1e6,
    stream: "alignment",
    ...overrides,
  };
}

function jsonResponse(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "content-type": "application/json" },
  });
}

interface FetchCall {
  url: string;
  body: Record<string, unknown> | null;
}

function recordingFetch(
  respond: (url: string, call: FetchCall) => Response,
): { calls: FetchCall[]; fetchFn: (url: string, init?: RequestInit) => Promise<Response> } {
  const calls: FetchCall[] = [];
  return {
    calls,
    fetchFn: (url, init) => {
      const call: FetchCall = {
        url,
        body: init?.body ? (JSON.parse(String(init.body)) as Record<string, unknown>) : null,
      };
      calls.push(call);
      return Promise.resolve(respond(url, call));
    },
  };
}

function makeSession(
  respond: (url: string, call: FetchCall) => Response,
  options: { debounceMs?: number; reconnectMs?: number; plBufferSize?: number } = {},
) {
  const sockets: FakeSocket[] = [];
  const { calls, fetchFn } = recordingFetch(respond);
  const session = new DashboardSession("http://box:9000/", {
    sockets: (url) => {
      const s = new FakeSocket(url);
      sockets.push(s);
      return s;
    },
    fetchFn,
    ...options,
  });
  return { session, sockets, calls };
}

function statusFrame(runId: string, seq: number, status: string, extra: object = {}) {
  return {
    kind: "run-status",
    run_id: runId,
    seq,
    ts: seq * 0.1,
    payload: { status, kind: "odmr", n_points: 3, derived: {}, error: null, ...extra },
  };
}

function pointFrame(runId: string, seq: number, index: number, signal: number) {
  return {
    kind: "spectrum-partial",
    run_id: runId,
    seq,
    ts: seq * 0.1,
    payload: { index, axis: 2.8e9 + index * 1e6, unit: "Hz", signal, reference: 100 },
  };
}

describe("startRun outcomes", () => {
  it("accepts a 202 and returns the run id", async () => {
    const { session, calls } = makeSession(() =>
      jsonResponse({ run_id: "01RUN", kind: "odmr", status: "queued", stream: "/stream" }, 202),
    );
    const outcome = await session.startRun({ kind: "odmr", config: "n_points = 5", seed: 3 });
    expect(outcome).toEqual({ ok: true, runId: "01RUN" });
    expect(calls[0]?.url).toBe("http://box:9000/runs");
    expect(calls[0]?.body).toEqual({ kind: "odmr", config: "n_points = 5", seed: 3 });
  });

  it("reports a busy instrument distinctly", async () => {
    const { session } = makeSession(() =>
      jsonResponse({ error: "a run is already in progress" }, 409),
    );
    const outcome = await session.startRun({ kind: "odmr" });
    expect(outcome.ok).toBe(false);
    if (!outcome.ok && outcome.busy) {
      expect(outcome.message).toMatch(/already in progress/);
      expect(outcome.message).toMatch(/wait for the current run/);
    } else {
      throw new Error("expected a busy outcome");
    }
  });

  it("surfaces the validation report on a config rejection", async () => {
    const { session } = makeSession(() =>
      jsonResponse(
        {
          ok: false,
          missing_keys: ["n_points"],
          out_of_band: [],
          warnings: [],
          summary: "missing required keys: n_points",
        },
        400,
      ),
    );
    const outcome = await session.startRun({ kind: "odmr", config: "freq_start = 2.8 GHz" });
    expect(outcome.ok).toBe(false);
    if (!outcome.ok && !outcome.busy) {
      expect(outcome.validation?.missing_keys).toEqual(["n_points"]);
      expect(outcome.message).toMatch(/n_points/);
    } else {
      throw new Error("expected a validation outcome");
    }
  });
});

describe("knob debouncing", () => {
  beforeEach(() => {
    vi.useFakeTimers();
  });
  afterEach(() => {
    vi.useRealTimers();
  });

  it("merges rapid edits into one POST", async () => {
    const { session, calls } = makeSession((url, call) =>
      jsonResponse(alignmentBody({ ...(call.body as Partial<AlignmentBody>) })),
    );
    session.setKnob("x_um", 1.5);
    session.setKnob("y_um", -0.5);
    session.setKnob("x_um", 2.0);
    // optimistic before any network traffic
    expect(session.knobs.x_um).toBe(2.0);
    expect(session.knobs.y_um).toBe(-0.5);
    expect(calls.length).toBe(0);

    await vi.advanceTimersByTimeAsync(60);
    expect(calls.length).toBe(1);
    expect(calls[0]?.url).toBe("http://box:9000/alignment");
    expect(calls[0]?.body).toEqual({ x_um: 2.0, y_um: -0.5 });
  });

  it("keeps the timer sliding while edits continue", async () => {
    const { session, calls } = makeSession((url, call) =>
      jsonResponse(alignmentBody({ ...(call.body as Partial<AlignmentBody>) })),
    );
    session.setKnob("x_um", 1);
    await vi.advanceTimersByTimeAsync(30);
    session.setKnob("x_um", 2);
    await vi.advanceTimersByTimeAsync(30);
    expect(calls.length).toBe(0);
    await vi.advanceTimersByTimeAsync(30);
    expect(calls.length).toBe(1);
    expect(calls[0]?.body).toEqual({ x_um: 2 });
  });

  it("reconciles from the service response", async () => {
    const { session } = makeSession(() =>
      jsonResponse(alignmentBody({ antenna_coupling: 1.0, expected_pl_rate_hz: 2.5e8 })),
    );
    session.setKnob("antenna_coupling", 7);
    await vi.advanceTimersByTimeAsync(60);
    // service clamped the value; the session adopts it
    expect(session.knobs.antenna_coupling).toBe(1.0);
    expect(session.expectedPlRateHz).toBe(2.5e8);
  });

  it("does not clobber a knob edited while the POST was in flight", async () => {
    let resolveFetch: ((r: Response) => void) | null = null;
    const calls: FetchCall[] = [];
    const session = new DashboardSession("http://box:9000", {
      sockets: () => {
        throw new Error("no sockets in this test");
      },
      fetchFn: (url, init) => {
        calls.push({ url, body: JSON.parse(String(init?.body)) });
        return new Promise<Response>((resolve) => {
          resolveFetch = resolve;
        });
      },
    });
    session.setKnob("x_um", 1);
    const flight = session.flushKnobs();
    await vi.advanceTimersByTimeAsync(0); // the POST starts on a microtask
    expect(calls.length).toBe(1);

    // edit lands while the first POST is still in the air
    session.setKnob("x_um", 3);
    resolveFetch!(jsonResponse(alignmentBody({ x_um: 1 })));
    await flight;
    expect(session.knobs.x_um).toBe(3);
    // y is not pending, so the service answer stands
    expect(session.knobs.y_um).toBe(0);
  });

  it("flushKnobs with nothing pending makes no request", async () => {
    const { session, calls } = makeSession(() => jsonResponse(alignmentBody()));
    await session.flushKnobs();
    expect(calls.length).toBe(0);
  });
});

describe("run watching over the stream", () => {
  it("collects points in index order and resolves on the terminal status", async () => {
    const { session, sockets } = makeSession(() => jsonResponse({}));
    const seen: number[] = [];
    const viewPromise = session.watchRun("01RUN", (p) => seen.push(p.index));

    const socket = sockets[0]!;
    expect(socket.url).toBe("ws://box:9000/stream");
    socket.open();
    expect(socket.ops()).toEqual([{ op: "subscribe", run_id: "01RUN", last_seq: -1 }]);

    socket.receive({ kind: "subscribed", run_id: "01RUN", replay_from: 0, next_seq: 0 });
    socket.receive(pointFrame("01RUN", 0, 0, 90));
    socket.receive(pointFrame("01RUN", 1, 1, 85));
    socket.receive(pointFrame("01RUN", 2, 2, 95));
    socket.receive(statusFrame("01RUN", 3, "done", { derived: { center_hz: 2.87e9 } }));

    const view = await viewPromise;
    expect(view.status).toBe("done");
    expect(view.derived["center_hz"]).toBe(2.87e9);
    expect(view.points.map((p) => p.index)).toEqual([0, 1, 2]);
    expect(view.log.dense).toBe(true);
    expect(seen).toEqual([0, 1, 2]);
    // terminal resolution also unsubscribes
    expect(socket.ops().at(-1)).toEqual({ op: "unsubscribe", run_id: "01RUN" });
  });

  it("drops stale frames after a replay overlap", async () => {
    const { session, sockets } = makeSession(() => jsonResponse({}));
    const seen: number[] = [];
    const viewPromise = session.watchRun("01RUN", (p) => seen.push(p.index));
    const socket = sockets[0]!;
    socket.open();

    socket.receive(pointFrame("01RUN", 0, 0, 90));
    socket.receive(pointFrame("01RUN", 1, 1, 85));
    socket.receive(pointFrame("01RUN", 1, 1, 85)); // replayed duplicate
    socket.receive(pointFrame("01RUN", 0, 0, 90)); // regression
    socket.receive(statusFrame("01RUN", 2, "done"));

    const view = await viewPromise;
    expect(seen).toEqual([0, 1]);
    expect(view.log.dense).toBe(true);
  });

  it("ignores frames for streams nobody watches", async () => {
    const { session, sockets } = makeSession(() => jsonResponse({}));
    const viewPromise = session.watchRun("01RUN");
    const socket = sockets[0]!;
    socket.open();
    socket.receive(pointFrame("OTHER", 0, 0, 1));
    socket.receive(statusFrame("01RUN", 0, "done"));
    const view = await viewPromise;
    expect(view.points).toEqual([]);
  });

  it("refuses a second watch on the same stream", async () => {
    const { session, sockets } = makeSession(() => jsonResponse({}));
    const first = session.watchRun("01RUN");
    await expect(session.watchRun("01RUN")).rejects.toThrow(/already watching/);
    sockets[0]!.open();
    sockets[0]!.receive(statusFrame("01RUN", 0, "done"));
    await first;
  });

  it("reports a failed run instead of hanging", async () => {
    const { session, sockets } = makeSession(() => jsonResponse({}));
    const viewPromise = session.watchRun("01RUN");
    const socket = sockets[0]!;
    socket.open();
    socket.receive(statusFrame("01RUN", 0, "failed", { error: "amplifier tripped" }));
    const view = await viewPromise;
    expect(view.status).toBe("failed");
    expect(view.error).toBe("amplifier tripped");
  });
});

describe("reconnection", () => {
  beforeEach(() => {
    vi.useFakeTimers();
  });
  afterEach(() => {
    vi.useRealTimers();
  });

  it("resubscribes from the last seen seq and flags the gap in state", async () => {
    const { session, sockets } = makeSession(() => jsonResponse({}));
    const states: ConnectionState[] = [];
    session.onStateChange((s) => states.push(s));

    const viewPromise = session.watchRun("01RUN");
    expect(states).toEqual(["connecting"]);

    const first = sockets[0]!;
    first.open();
    first.receive(pointFrame("01RUN", 0, 0, 90));
    first.receive(pointFrame("01RUN", 1, 1, 85));
    expect(states).toEqual(["connecting", "live"]);

    first.dropFromServer();
    expect(states).toEqual(["connecting", "live", "stale"]);
    expect(sockets.length).toBe(1);

    await vi.advanceTimersByTimeAsync(300);
    expect(sockets.length).toBe(2);
    const second = sockets[1]!;
    second.open();
    expect(states.at(-1)).toBe("live");
    // resume cursor carries across sockets
    expect(second.ops()).toEqual([{ op: "subscribe", run_id: "01RUN", last_seq: 1 }]);

    second.receive(pointFrame("01RUN", 2, 2, 95));
    second.receive(statusFrame("01RUN", 3, "done"));
    const view = await viewPromise;
    expect(view.points.length).toBe(3);
    expect(view.log.dense).toBe(true);
  });

  it("stops reconnecting once closed", async () => {
    const { session, sockets } = makeSession(() => jsonResponse({}));
    void session.watchRun("01RUN").catch(() => undefined);
    sockets[0]!.open();
    session.close();
    expect(session.connectionState).toBe("idle");
    await vi.advanceTimersByTimeAsync(1000);
    expect(sockets.length).toBe(1);
  });
});

describe("alignment stream", () => {
  it("buffers pl points and resets per watch", async () => {
    const { session, sockets } = makeSession(() => jsonResponse(alignmentBody()), {
      plBufferSize: 3,
    });
    const stop = session.watchAlignment();
    const socket = sockets[0]!;
    socket.open();
    expect(socket.ops()).toEqual([{ op: "subscribe", run_id: "alignment", last_seq: -1 }]);

    for (let seq = 0; seq < 5; seq++) {
      socket.receive({
        kind: "pl-point",
        run_id: "alignment",
        seq,
        ts: seq * 0.05,
        payload: { index: seq, axis: seq * 0.05, unit: "s", signal: 15000 + seq, reference: null, rate_hz: 3e8 + seq, window_ns: 50 },
      });
    }
    // rolling window keeps only the newest three
    expect(session.plPoints.map((p) => p.seq)).toEqual([2, 3, 4]);
    expect(session.plPoints[2]?.rateHz).toBe(3e8 + 4);

    stop();
    expect(socket.ops().at(-1)).toEqual({ op: "unsubscribe", run_id: "alignment" });

    // a new watch starts from scratch: fresh buffer, fresh cursor
    session.watchAlignment();
    expect(session.plPoints).toEqual([]);
    expect(socket.ops().at(-1)).toEqual({ op: "subscribe", run_id: "alignment", last_seq: -1 });
  });
});
