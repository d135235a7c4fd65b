"""Channel-resolved pulse programs: the compiler's input.

Event fields that change across a sweep are affine expressions
``base + scale * R`` in the single sweep register R. Time fields are
kept in integer generator cycles; R carries cycles for time sweeps and
Hz for frequency sweeps, so an event's operands evaluate exactly at
every sweep point.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

from .channels import Channel, default_channels
from .clocks import ClockSpec


@dataclass(frozen=True)
class Affine:
    """base + scale * R, evaluated at a concrete register value."""

    base: float
    scale: float = 0

    def at(self, r):
        if self.scale == 0:
            return self.base
        return self.base + self.scale * r

    def at_cycles(self, r) -> int:
        v = self.at(r)
        iv = int(round(v))
        if v != iv:
            raise ValueError(f"expression {self} is not integral at R={r}: {v}")
        return iv

    @property
    def is_const(self) -> bool:
        return self.scale == 0

    def __str__(self):
        if self.scale == 0:
            return repr(self.base) if isinstance(self.base, float) else str(self.base)
        b = repr(self.base) if isinstance(self.base, float) else str(self.base)
        s = repr(self.scale) if isinstance(self.scale, float) else str(self.scale)
        return f"{b}+{s}*R"


def as_affine(value) -> Affine:
    if isinstance(value, Affine):
        return value
    return Affine(value)


class Envelope(enum.Enum):
    CONSTANT = "constant"
    GAUSSIAN_EDGE = "gaussian-edge"


@dataclass(frozen=True)
class MicrowavePulse:
    frequency_hz: Affine
    gain: Affine
    phase_deg: float = 0.0
    envelope: Envelope = Envelope.CONSTANT

    def concrete(self, r) -> "MicrowavePulse":
        return MicrowavePulse(
            Affine(self.frequency_hz.at(r)),
            Affine(self.gain.at(r)),
            self.phase_deg,
            self.envelope,
        )


@dataclass(frozen=True)
class LaserPulse:
    """Gated laser on for the event's duration; no parameters."""


@dataclass(frozen=True)
class TriggerWindow:
    tag: str


Payload = MicrowavePulse | LaserPulse | TriggerWindow


def microwave(frequency_hz, gain, phase_deg=0.0, envelope=Envelope.CONSTANT) -> MicrowavePulse:
    return MicrowavePulse(as_affine(frequency_hz), as_affine(gain), phase_deg, envelope)


@dataclass(frozen=True)
class PulseEvent:
    channel: int
    start: Affine
    length: Affine
    payload: Payload
    label: str | None = None  # config key shown on diagrams, not compiled

    def __post_init__(self):
        object.__setattr__(self, "start", as_affine(self.start))
        object.__setattr__(self, "length", as_affine(self.length))

    def end(self) -> Affine:
        return Affine(self.start.base + self.length.base, self.start.scale + self.length.scale)

    def describe(self) -> str:
        kind = type(self.payload).__name__
        lbl = f" [{self.label}]" if self.label else ""
        return f"{kind}(ch={self.channel}, t={self.start}, len={self.length}){lbl}"


@dataclass(frozen=True)
class Sweep:
    """Values taken by the sweep register, one per sweep point.

    Linear sweeps carry (start, step); irregular axes (log-spaced T1
    delays) carry an explicit value tuple instead.
    """

    key: str
    n_points: int
    start: float = 0.0
    step: float = 0.0
    values: tuple | None = None

    def __post_init__(self):
        if self.n_points < 1:
            raise ValueError("sweep needs n_points >= 1")
        if self.values is not None:
            object.__setattr__(self, "values", tuple(self.values))
            if len(self.values) != self.n_points:
                raise ValueError("explicit sweep values length != n_points")

    @property
    def linear(self) -> bool:
        return self.values is None

    def value_at(self, i: int):
        if self.values is not None:
            return self.values[i]
        return self.start + i * self.step

    def all_values(self) -> tuple:
        return tuple(self.value_at(i) for i in range(self.n_points))


@dataclass(frozen=True)
class PulseProgram:
    events: tuple[PulseEvent, ...]
    sweep: Sweep | None = None
    inner_reps: int = 1
    clock: ClockSpec = field(default_factory=ClockSpec)
    channels: tuple[Channel, ...] = field(default_factory=default_channels)
    epoch_cycles: int | None = None  # explicit shot frame; None = auto from events

    def __post_init__(self):
        object.__setattr__(self, "events", tuple(self.events))
        if self.inner_reps < 1:
            raise ValueError("inner_reps must be >= 1")

    @property
    def n_sweep_points(self) -> int:
        return self.sweep.n_points if self.sweep is not None else 1

    def register_values(self) -> tuple:
        if self.sweep is None:
            return (0,)
        return self.sweep.all_values()

    def channel_by_id(self, channel_id: int) -> Channel:
        for ch in self.channels:
            if ch.id == channel_id:
                return ch
        raise LookupError(f"unknown channel id {channel_id}")

    def max_end_cycles(self) -> int:
        """Latest event end over all sweep points, in cycles."""
        worst = 0
        for r in self.register_values():
            for ev in self.events:
                worst = max(worst, ev.end().at_cycles(r))
        return worst


# ---------------------------------------------------------------------------
# Timing legality

@dataclass(frozen=True)
class TimingViolation:
    kind: str  # "overlap" | "epoch-overflow" | "bad-length" | "negative-start"
    channel: int
    sweep_index: int
    first: PulseEvent
    second: PulseEvent | None = None
    overlap_cycles: int = 0

    def __str__(self):
        if self.kind == "overlap":
            return (
                f"channel {self.channel} @ sweep point {self.sweep_index}: "
                f"{self.first.describe()} overlaps {self.second.describe()} "
                f"by {self.overlap_cycles} cycles"
            )
        return (
            f"channel {self.channel} @ sweep point {self.sweep_index}: "
            f"{self.kind} on {self.first.describe()}"
        )


def check_timing(program: PulseProgram) -> list[TimingViolation]:
    """All per-channel interval overlaps and epoch overflows, evaluated
    at every sweep point. Intervals are half-open, so abutting pulses
    are legal. Empty result means compile() will not raise a timing
    error."""
    out: list[TimingViolation] = []
    for i, r in enumerate(program.register_values()):
        per_channel: dict[int, list[tuple[int, int, PulseEvent]]] = {}
        for ev in program.events:
            try:
                start = ev.start.at_cycles(r)
                length = ev.length.at_cycles(r)
            except ValueError:
                out.append(TimingViolation("bad-length", ev.channel, i, ev))
                continue
            if length < 1:
                out.append(TimingViolation("bad-length", ev.channel, i, ev))
                continue
            if start < 0:
                out.append(TimingViolation("negative-start", ev.channel, i, ev))
                continue
            if program.epoch_cycles is not None and start + length > program.epoch_cycles:
                out.append(TimingViolation("epoch-overflow", ev.channel, i, ev))
            per_channel.setdefault(ev.channel, []).append((start, start + length, ev))
        for channel, spans in per_channel.items():
            spans.sort(key=lambda s: (s[0], s[1]))
            for (a0, a1, ea), (b0, b1, eb) in zip(spans, spans[1:]):
                if b0 < a1:
                    out.append(
                        TimingViolation(
                            "overlap", channel, i, ea, eb,
                            overlap_cycles=min(a1, b1) - b0,
                        )
                    )
    return out


def shot_frame_cycles(program: PulseProgram) -> int:
    """Cycles one shot occupies: the epoch-aligned worst-case event end
    (or the explicit epoch length when the program declares one)."""
    if not program.events:
        return 0
    end = program.epoch_cycles if program.epoch_cycles is not None else program.max_end_cycles()
    return program.clock.align_up(end)


def validate_band(program: PulseProgram) -> list[str]:
    """Microwave frequencies outside their channel band, at any sweep
    point; strings describe each violation."""
    problems = []
    for ev in program.events:
        if not isinstance(ev.payload, MicrowavePulse):
            continue
        ch = program.channel_by_id(ev.channel)
        for i, r in enumerate(program.register_values()):
            f = ev.payload.frequency_hz.at(r)
            if not math.isfinite(f) or not ch.in_band(f):
                problems.append(
                    f"{ev.describe()}: frequency {f} Hz outside channel {ch.id} "
                    f"band [{ch.band_low_hz}, {ch.band_high_hz}] at sweep point {i}"
                )
    return problems
