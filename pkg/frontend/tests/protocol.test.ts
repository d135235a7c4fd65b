import { describe, expect, it } from "vitest";

import {
  ALIGNMENT_STREAM,
  FrameLog,
  isAck,
  isGap,
  isTerminal,
  parseFrame,
  pingOp,
  subscribeOp,
  unsubscribeOp,
  type StreamFrame,
} from "../src/protocol.js";

function frame(kind: string, seq: number, payload: object = {}): StreamFrame {
  return { kind, run_id: "r1", seq, payload, ts: 0 } as StreamFrame;
}

describe("parseFrame", () => {
  it("round-trips a spectrum frame", () => {
    const raw = JSON.stringify({
      kind: "spectrum-partial",
      run_id: "01ABC",
      seq: 3,
      ts: 12.5,
      payload: { index: 3, axis: 2.87e9, unit: "Hz", signal: 40, reference: 52 },
    });
    const f = parseFrame(raw);
    expect(f.kind).toBe("spectrum-partial");
    expect(f.seq).toBe(3);
    expect((f.payload as { axis: number }).axis).toBe(2.87e9);
  });

  it("rejects non-JSON input", () => {
    expect(() => parseFrame("{nope")).toThrow(/not a frame/);
  });

  it("rejects JSON without a kind", () => {
    expect(() => parseFrame('{"seq": 0}')).toThrow(/missing kind/);
  });
});

describe("frame classifiers", () => {
  it("recognizes subscription acks", () => {
    const ack = parseFrame(
      JSON.stringify({ kind: "subscribed", next_seq: 4, replay_from: 0, run_id: "r1" }),
    );
    expect(isAck(ack)).toBe(true);
    expect(isGap(ack)).toBe(false);
  });

  it("recognizes gap markers by the sentinel seq", () => {
    const gap = frame("run-status", -1, { status: "gap", dropped: 7, resume_seq: 21 });
    expect(isGap(gap)).toBe(true);
    expect(isTerminal(gap)).toBe(false);
  });

  it("treats done and failed statuses as terminal", () => {
    expect(isTerminal(frame("run-status", 9, { status: "done" }))).toBe(true);
    expect(isTerminal(frame("run-status", 9, { status: "failed" }))).toBe(true);
    expect(isTerminal(frame("run-status", 0, { status: "running" }))).toBe(false);
    expect(isTerminal(frame("spectrum-partial", 9, { status: "done" }))).toBe(false);
  });
});

describe("subscription ops", () => {
  it("builds subscribe with the resume cursor", () => {
    expect(JSON.parse(subscribeOp("r1", 41))).toEqual({
      op: "subscribe",
      run_id: "r1",
      last_seq: 41,
    });
  });

  it("addresses the alignment stream by its reserved id", () => {
    expect(JSON.parse(subscribeOp(ALIGNMENT_STREAM, -1))).toEqual({
      op: "subscribe",
      run_id: "alignment",
      last_seq: -1,
    });
  });

  it("builds unsubscribe and ping", () => {
    expect(JSON.parse(unsubscribeOp("r2"))).toEqual({ op: "unsubscribe", run_id: "r2" });
    expect(JSON.parse(pingOp())).toEqual({ op: "ping" });
  });
});

describe("FrameLog", () => {
  it("accepts consecutive frames and reports a dense log", () => {
    const log = new FrameLog();
    for (let i = 0; i < 5; i++) {
      expect(log.accept(frame("spectrum-partial", i))).toBe("ok");
    }
    expect(log.lastSeq).toBe(4);
    expect(log.dense).toBe(true);
  });

  it("never lets the cursor regress", () => {
    const log = new FrameLog();
    log.accept(frame("spectrum-partial", 0));
    log.accept(frame("spectrum-partial", 1));
    expect(log.accept(frame("spectrum-partial", 1))).toBe("stale");
    expect(log.accept(frame("spectrum-partial", 0))).toBe("stale");
    expect(log.lastSeq).toBe(1);
    expect(log.dense).toBe(true);
  });

  it("records gaps and stops claiming density", () => {
    const log = new FrameLog();
    log.accept(frame("pl-point", 0));
    expect(
      log.accept(frame("pl-point", -1, { status: "gap", dropped: 3, resume_seq: 4 })),
    ).toBe("gap");
    log.accept(frame("pl-point", 4));
    expect(log.gaps).toEqual([{ dropped: 3, resumeSeq: 4 }]);
    expect(log.dense).toBe(false);
  });

  it("notices silent holes even without a gap marker", () => {
    const log = new FrameLog();
    log.accept(frame("pl-point", 0));
    log.accept(frame("pl-point", 2));
    expect(log.gaps).toEqual([]);
    expect(log.dense).toBe(false);
  });

  it("starts dense on an empty stream", () => {
    expect(new FrameLog().dense).toBe(true);
  });
});
