"""In-process frame fan-out between the executor and stream subscribers.

Every frame is appended once to its run's log (a drop-oldest ring) and
offered to each subscriber watching that run. A slow consumer loses the
oldest frames buffered for it, never blocks the publisher, and learns how
many frames it missed through an out-of-band gap notification carrying
``seq = -1``. Logged frames keep per-run sequence numbers dense from 0,
so a reconnecting client can resume by sending the last sequence number
it received.
"""

from __future__ import annotations

import asyncio
import json
import time
from collections import deque
from dataclasses import dataclass
from typing import Union

FRAME_PL_POINT = "pl-point"
FRAME_SPECTRUM_PARTIAL = "spectrum-partial"
FRAME_SWEEP_POINT = "sweep-point"
FRAME_RUN_STATUS = "run-status"
FRAME_KINDS = (
    FRAME_PL_POINT,
    FRAME_SPECTRUM_PARTIAL,
    FRAME_SWEEP_POINT,
    FRAME_RUN_STATUS,
)

#: Sequence number of out-of-band notifications. Logged frames count from 0.
OUT_OF_BAND_SEQ = -1

DEFAULT_LOG_LIMIT = 10_000
DEFAULT_SUBSCRIBER_LIMIT = 1_024


@dataclass(frozen=True)
class StreamFrame:
    kind: str
    run_id: str
    seq: int
    payload: dict
    ts: float

    def to_json(self) -> str:
        doc = {
            "kind": self.kind,
            "run_id": self.run_id,
            "seq": self.seq,
            "payload": self.payload,
            "ts": self.ts,
        }
        return json.dumps(doc, separators=(",", ":"), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "StreamFrame":
        doc = json.loads(text)
        return cls(
            kind=doc["kind"],
            run_id=doc["run_id"],
            seq=int(doc["seq"]),
            payload=doc["payload"],
            ts=float(doc["ts"]),
        )


def gap_frame(run_id: str, dropped: int, resume_seq: "int | None" = None) -> StreamFrame:
    """Out-of-band notice that ``dropped`` frames were lost for this consumer.

    ``resume_seq`` names the first sequence number still available, when
    known; resubscribing with an older ``last_seq`` cannot recover more.
    """
    return StreamFrame(
        kind=FRAME_RUN_STATUS,
        run_id=run_id,
        seq=OUT_OF_BAND_SEQ,
        payload={"status": "gap", "dropped": dropped, "resume_seq": resume_seq},
        ts=time.time(),
    )


class _Log:
    __slots__ = ("frames", "next_seq")

    def __init__(self, limit: int):
        self.frames: "deque[StreamFrame]" = deque(maxlen=limit)
        self.next_seq = 0


#: Control messages (plain dicts) share the buffer so one writer task can
#: serialize everything onto the socket in order.
Outgoing = Union[StreamFrame, dict]


class Subscription:
    """One consumer's view: watched run ids plus a bounded frame buffer."""

    def __init__(self, limit: int):
        self._limit = limit
        self._buf: "deque[Outgoing]" = deque()
        self._dropped: dict[str, int] = {}
        self._wakeup = asyncio.Event()
        self.keys: set[str] = set()

    def offer(self, frame: StreamFrame) -> None:
        """Live-path delivery; over the bound, the oldest frame is dropped."""
        if len(self._buf) >= self._limit:
            oldest = self._buf.popleft()
            if isinstance(oldest, StreamFrame):
                self._dropped[oldest.run_id] = self._dropped.get(oldest.run_id, 0) + 1
        self._buf.append(frame)
        self._wakeup.set()

    def replay(self, items: "list[Outgoing]") -> None:
        """History the consumer explicitly asked for; not subject to the bound."""
        self._buf.extend(items)
        if items:
            self._wakeup.set()

    def offer_control(self, payload: dict) -> None:
        self._buf.append(payload)
        self._wakeup.set()

    def take_dropped(self, run_id: str) -> int:
        return self._dropped.pop(run_id, 0)

    async def drain(self) -> "list[Outgoing]":
        while not self._buf:
            self._wakeup.clear()
            await self._wakeup.wait()
        out = list(self._buf)
        self._buf.clear()
        return out


class FrameHub:
    """Publisher side: per-run logs and the live subscriber set.

    All methods are synchronous and must run on the event-loop thread, so
    publish/attach pairs are atomic with respect to each other.
    """

    def __init__(
        self,
        log_limit: int = DEFAULT_LOG_LIMIT,
        subscriber_limit: int = DEFAULT_SUBSCRIBER_LIMIT,
    ):
        self._log_limit = log_limit
        self._subscriber_limit = subscriber_limit
        self._logs: dict[str, _Log] = {}
        self._subs: "list[Subscription]" = []

    # -- publishing ----------------------------------------------------------

    def publish(self, run_id: str, kind: str, payload: dict, ts: "float | None" = None) -> StreamFrame:
        if kind not in FRAME_KINDS:
            raise ValueError(f"unknown frame kind {kind!r}")
        log = self._logs.get(run_id)
        if log is None:
            log = self._logs[run_id] = _Log(self._log_limit)
        frame = StreamFrame(kind, run_id, log.next_seq, payload, time.time() if ts is None else ts)
        log.next_seq += 1
        log.frames.append(frame)
        for sub in self._subs:
            if run_id in sub.keys:
                sub.offer(frame)
        return frame

    def reset(self, run_id: str) -> None:
        """Restart a stream's numbering from 0 (new alignment session)."""
        self._logs.pop(run_id, None)

    # -- subscriptions -------------------------------------------------------

    def connect(self) -> Subscription:
        sub = Subscription(self._subscriber_limit)
        self._subs.append(sub)
        return sub

    def disconnect(self, sub: Subscription) -> None:
        if sub in self._subs:
            self._subs.remove(sub)

    def attach(self, sub: Subscription, run_id: str, last_seq: int = -1) -> int:
        """Subscribe ``sub`` to ``run_id``, replaying logged frames after
        ``last_seq``. Returns the number of frames replayed."""
        sub.keys.add(run_id)
        log = self._logs.get(run_id)
        if log is None:
            return 0
        frames = [f for f in log.frames if f.seq > last_seq]
        expected_first = last_seq + 1
        out: "list[Outgoing]" = []
        if frames and frames[0].seq > expected_first:
            out.append(gap_frame(run_id, frames[0].seq - expected_first, frames[0].seq))
        elif not frames and log.next_seq > expected_first:
            out.append(gap_frame(run_id, log.next_seq - expected_first, None))
        out.extend(frames)
        sub.replay(out)
        return len(frames)

    def detach(self, sub: Subscription, run_id: str) -> None:
        sub.keys.discard(run_id)

    # -- introspection -------------------------------------------------------

    def log_frames(self, run_id: str) -> "list[StreamFrame]":
        log = self._logs.get(run_id)
        return list(log.frames) if log is not None else []

    def next_seq(self, run_id: str) -> int:
        log = self._logs.get(run_id)
        return log.next_seq if log is not None else 0
