/**
 * Wire protocol of the nvlab control service.
 *
 * Everything the dashboard renders arrives as a StreamFrame; this
 * module owns parsing, the subscribe/unsubscribe ops, and the
 * per-stream sequence bookkeeping (dense seq from 0, gap markers at
 * seq -1, displayed numbers never regress).
 */

export interface StreamFrame {
  kind: string;
  run_id: string;
  seq: number;
  payload: Record<string, unknown>;
  ts: number;
}

export interface SweepPointPayload {
  index: number;
  axis: number;
  unit: string;
  signal: number;
  reference: number | null;
  rate_hz?: number;
  window_ns?: number;
}

export interface RunStatusPayload {
  status: string;
  kind: string;
  n_points: number;
  derived: Record<string, number>;
  error: string | null;
}

export interface SubscribedAck {
  kind: "subscribed";
  run_id: string;
  replay_from: number;
  next_seq: number;
}

export const ALIGNMENT_STREAM = "alignment";

export function parseFrame(text: string): StreamFrame {
  let raw: unknown;
  try {
    raw = JSON.parse(text);
  } catch {
    throw new Error(`not a frame: ${text.slice(0, 80)}`);
  }
  const frame = raw as Partial<StreamFrame>;
  if (typeof frame !== "object" || frame === null || typeof frame.kind !== "string") {
    throw new Error("frame missing kind");
  }
  return frame as StreamFrame;
}

export function isAck(frame: StreamFrame): frame is StreamFrame & SubscribedAck {
  return frame.kind === "subscribed";
}

export function isGap(frame: StreamFrame): boolean {
  return frame.seq === -1 && frame.payload?.["status"] === "gap";
}

export function isTerminal(frame: StreamFrame): boolean {
  if (frame.kind !== "run-status" || frame.seq < 0) return false;
  const status = frame.payload?.["status"];
  return status === "done" || status === "failed";
}

export function subscribeOp(runId: string, lastSeq: number): string {
  return JSON.stringify({ op: "subscribe", run_id: runId, last_seq: lastSeq });
}

export function unsubscribeOp(runId: string): string {
  return JSON.stringify({ op: "unsubscribe", run_id: runId });
}

export function pingOp(): string {
  return JSON.stringify({ op: "ping" });
}

export interface Gap {
  dropped: number;
  resumeSeq: number | null;
}

/**
 * Sequence bookkeeping for one stream id.
 *
 * `accept` classifies each frame: duplicates/regressions from a
 * replay overlap are "stale" and must not be rendered twice; gap
 * markers are recorded so the UI can say what it missed. `dense` is
 * true iff every sequence number from 0 to lastSeq was seen exactly
 * once with no gap markers.
 */
export class FrameLog {
  lastSeq = -1;
  gaps: Gap[] = [];
  private accepted = 0;

  accept(frame: StreamFrame): "ok" | "stale" | "gap" {
    if (isGap(frame)) {
      const payload = frame.payload as { dropped?: number; resume_seq?: number | null };
      this.gaps.push({
        dropped: payload.dropped ?? 0,
        resumeSeq: payload.resume_seq ?? null,
      });
      return "gap";
    }
    if (frame.seq <= this.lastSeq) return "stale";
    this.lastSeq = frame.seq;
    this.accepted += 1;
    return "ok";
  }

  get dense(): boolean {
    return this.gaps.length === 0 && this.accepted === this.lastSeq + 1;
  }
}
