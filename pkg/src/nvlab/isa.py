"""Instruction stream emitted by the compiler and consumed by the
virtual instrument.

Eight opcodes. Operands that vary across a sweep are affine
expressions in the sweep register R; SWEEP_STEP advances R between
sweep points, SYNC closes each shot at a fixed epoch boundary so
repetitions stay phase-locked to the readout clock.

The text form (one instruction per line, ``#`` metadata header) is the
on-disk and on-wire representation; ``from_text(to_text())`` is exact.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

from .clocks import ClockSpec
from .errors import MalformedStreamError
from .program import Affine, Envelope

_BINARY_MAGIC = b"NVISA1\x00"

PARAM_FREQUENCY = "frequency"
PARAM_GAIN = "gain"
PARAM_PHASE = "phase"
PARAMS = (PARAM_FREQUENCY, PARAM_GAIN, PARAM_PHASE)


def format_operand(x: Affine) -> str:
    if x.scale == 0:
        return _num(x.base)
    return f"{_num(x.base)}+({_num(x.scale)})*R"


def _num(v) -> str:
    # ints stay ints so cycle counts read cleanly
    if isinstance(v, float) and v.is_integer() and abs(v) < 2**53:
        return str(int(v))
    return repr(v)


def parse_operand(text: str) -> Affine:
    text = text.strip()
    if text.endswith(")*R"):
        head, _, tail = text.rpartition("+(")
        if not head:
            raise MalformedStreamError(f"bad operand {text!r}")
        return Affine(_parse_num(head), _parse_num(tail[:-3]))
    return Affine(_parse_num(text))


def _parse_num(text: str):
    try:
        f = float(text)
    except ValueError as err:
        raise MalformedStreamError(f"bad number {text!r}") from err
    if f.is_integer() and "." not in text and "e" not in text.lower():
        return int(f)
    return f


# ---------------------------------------------------------------------------
# Instructions

@dataclass(frozen=True)
class SetParam:
    channel: int
    param: str
    value: Affine

    def encode(self) -> str:
        return f"SET_PARAM ch={self.channel} {self.param} {format_operand(self.value)}"


@dataclass(frozen=True)
class Play:
    channel: int
    start: Affine
    length: Affine
    shape: Envelope = Envelope.CONSTANT

    def encode(self) -> str:
        line = (
            f"PLAY ch={self.channel} t={format_operand(self.start)}"
            f" len={format_operand(self.length)}"
        )
        if self.shape is not Envelope.CONSTANT:
            line += f" shape={self.shape.value}"
        return line


@dataclass(frozen=True)
class Trigger:
    channel: int
    start: Affine
    length: Affine
    tag: str

    def encode(self) -> str:
        return (
            f"TRIGGER ch={self.channel} t={format_operand(self.start)}"
            f" len={format_operand(self.length)} tag={self.tag}"
        )


@dataclass(frozen=True)
class Sync:
    frame_cycles: int

    def encode(self) -> str:
        return f"SYNC {self.frame_cycles}"


@dataclass(frozen=True)
class LoopBegin:
    count: int

    def encode(self) -> str:
        return f"LOOP_BEGIN {self.count}"


@dataclass(frozen=True)
class LoopEnd:
    def encode(self) -> str:
        return "LOOP_END"


@dataclass(frozen=True)
class SweepStep:
    increment: float

    def encode(self) -> str:
        return f"SWEEP_STEP {_num(self.increment)}"


@dataclass(frozen=True)
class Halt:
    def encode(self) -> str:
        return "HALT"


Instruction = SetParam | Play | Trigger | Sync | LoopBegin | LoopEnd | SweepStep | Halt


@dataclass(frozen=True)
class StreamMeta:
    total_cycles: int
    n_sweep_points: int
    inner_reps: int
    clock: ClockSpec
    sweep_key: str = ""
    sweep_start: float = 0.0

    def header_lines(self) -> list[str]:
        return [
            "# nvlab-isa 1",
            f"# total_cycles = {self.total_cycles}",
            f"# n_sweep_points = {self.n_sweep_points}",
            f"# inner_reps = {self.inner_reps}",
            f"# generator_clock_hz = {_num(self.clock.generator_clock_hz)}",
            f"# readout_clock_hz = {_num(self.clock.readout_clock_hz)}",
            f"# cycles_per_sync_epoch = {self.clock.cycles_per_sync_epoch}",
            f"# sweep_key = {self.sweep_key or '-'}",
            f"# sweep_start = {_num(self.sweep_start)}",
        ]


@dataclass(frozen=True)
class InstructionStream:
    meta: StreamMeta
    instructions: tuple[Instruction, ...]

    def __post_init__(self):
        object.__setattr__(self, "instructions", tuple(self.instructions))

    def __iter__(self):
        return iter(self.instructions)

    def __len__(self):
        return len(self.instructions)

    def to_text(self) -> str:
        lines = self.meta.header_lines()
        lines.extend(ins.encode() for ins in self.instructions)
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "InstructionStream":
        header: dict[str, str] = {}
        instructions: list[Instruction] = []
        for raw in text.splitlines():
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if "=" in body:
                    key, _, val = body.partition("=")
                    header[key.strip()] = val.strip()
                continue
            instructions.append(_decode_instruction(line))
        try:
            clock = ClockSpec(
                generator_clock_hz=float(header["generator_clock_hz"]),
                readout_clock_hz=float(header["readout_clock_hz"]),
                cycles_per_sync_epoch=int(header["cycles_per_sync_epoch"]),
            )
            sweep_key = header["sweep_key"]
            meta = StreamMeta(
                total_cycles=int(header["total_cycles"]),
                n_sweep_points=int(header["n_sweep_points"]),
                inner_reps=int(header["inner_reps"]),
                clock=clock,
                sweep_key="" if sweep_key == "-" else sweep_key,
                sweep_start=_parse_num(header["sweep_start"]),
            )
        except KeyError as err:
            raise MalformedStreamError(f"missing header field {err.args[0]!r}") from err
        return cls(meta, tuple(instructions))

    def to_binary(self) -> bytes:
        """Length-prefixed frames: magic, then one u32-prefixed UTF-8 blob
        per header line and per instruction."""
        frames = self.meta.header_lines()
        frames.extend(ins.encode() for ins in self.instructions)
        out = [_BINARY_MAGIC, struct.pack("<I", len(frames))]
        for frame in frames:
            blob = frame.encode("utf-8")
            out.append(struct.pack("<I", len(blob)))
            out.append(blob)
        return b"".join(out)

    @classmethod
    def from_binary(cls, data: bytes) -> "InstructionStream":
        if not data.startswith(_BINARY_MAGIC):
            raise MalformedStreamError("bad stream magic")
        pos = len(_BINARY_MAGIC)
        if pos + 4 > len(data):
            raise MalformedStreamError("truncated stream header")
        (count,) = struct.unpack_from("<I", data, pos)
        pos += 4
        frames = []
        for _ in range(count):
            if pos + 4 > len(data):
                raise MalformedStreamError("truncated frame length")
            (n,) = struct.unpack_from("<I", data, pos)
            pos += 4
            if pos + n > len(data):
                raise MalformedStreamError("truncated frame body")
            frames.append(data[pos : pos + n].decode("utf-8"))
            pos += n
        if pos != len(data):
            raise MalformedStreamError("trailing bytes after last frame")
        return cls.from_text("\n".join(frames))


def _split_tokens(parts: list[str], line: str) -> dict[str, str]:
    out = {}
    for part in parts:
        if "=" not in part:
            raise MalformedStreamError(f"bad token {part!r} in {line!r}")
        key, _, val = part.partition("=")
        out[key] = val
    return out


def _decode_instruction(line: str) -> Instruction:
    try:
        return _decode_tokens(line)
    except (KeyError, ValueError) as err:
        raise MalformedStreamError(f"bad instruction {line!r}: {err}") from err


def _decode_tokens(line: str) -> Instruction:
    parts = line.split()
    op = parts[0]
    if op == "SET_PARAM":
        if len(parts) != 4:
            raise MalformedStreamError(f"bad SET_PARAM: {line!r}")
        tok = _split_tokens(parts[1:2], line)
        param = parts[2]
        if param not in PARAMS:
            raise MalformedStreamError(f"unknown parameter {param!r} in {line!r}")
        return SetParam(int(tok["ch"]), param, parse_operand(parts[3]))
    if op == "PLAY":
        tok = _split_tokens(parts[1:], line)
        shape = Envelope(tok.get("shape", Envelope.CONSTANT.value))
        return Play(int(tok["ch"]), parse_operand(tok["t"]), parse_operand(tok["len"]), shape)
    if op == "TRIGGER":
        tok = _split_tokens(parts[1:], line)
        return Trigger(int(tok["ch"]), parse_operand(tok["t"]), parse_operand(tok["len"]), tok["tag"])
    if op == "SYNC":
        if len(parts) != 2:
            raise MalformedStreamError(f"bad SYNC: {line!r}")
        return Sync(int(parts[1]))
    if op == "LOOP_BEGIN":
        if len(parts) != 2:
            raise MalformedStreamError(f"bad LOOP_BEGIN: {line!r}")
        return LoopBegin(int(parts[1]))
    if op == "LOOP_END":
        return LoopEnd()
    if op == "SWEEP_STEP":
        if len(parts) != 2:
            raise MalformedStreamError(f"bad SWEEP_STEP: {line!r}")
        return SweepStep(_parse_num(parts[1]))
    if op == "HALT":
        return Halt()
    raise MalformedStreamError(f"unknown opcode {op!r}")
