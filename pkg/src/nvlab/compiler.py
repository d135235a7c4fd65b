"""Compile pulse programs to instruction streams, and back.

``compile`` lowers a program to at most two nested loops: the sweep on
the outside, shot repetitions on the inside. Linear sweeps are encoded
once with affine operands plus a SWEEP_STEP; irregular sweeps (explicit
value lists) are unrolled point by point with zero-increment
SWEEP_STEPs marking the boundaries. ``decompile`` interprets a stream
back into concrete per-shot events, which is also how the virtual
instrument consumes it.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import (
    BandError,
    EpochOverflowError,
    MalformedStreamError,
    OverlapError,
    ProgramError,
)
from .isa import (
    PARAM_FREQUENCY,
    PARAM_GAIN,
    PARAM_PHASE,
    Halt,
    InstructionStream,
    LoopBegin,
    LoopEnd,
    Play,
    SetParam,
    StreamMeta,
    SweepStep,
    Sync,
    Trigger,
)
from .program import (
    Affine,
    LaserPulse,
    MicrowavePulse,
    Payload,
    PulseEvent,
    PulseProgram,
    TriggerWindow,
    check_timing,
    shot_frame_cycles,
    validate_band,
)

MAX_LOOP_DEPTH = 2


def compile(program: PulseProgram) -> InstructionStream:  # noqa: A001
    """Lower a pulse program to an instruction stream.

    Raises OverlapError / EpochOverflowError / ProgramError when the
    program is not timing-legal and BandError when a microwave
    frequency leaves its channel band at any sweep point.
    """
    band_problems = validate_band(program)
    if band_problems:
        raise BandError("; ".join(band_problems))
    for v in check_timing(program):
        if v.kind == "overlap":
            raise OverlapError(
                v.channel, v.first.describe(), v.second.describe(),
                v.overlap_cycles, v.sweep_index,
            )
        if v.kind == "epoch-overflow":
            raise EpochOverflowError(str(v))
        raise ProgramError(str(v))

    sweep = program.sweep
    meta_key = sweep.key if sweep is not None else ""
    meta_start = (sweep.start if sweep.linear else sweep.values[0]) if sweep is not None else 0.0

    if not program.events:
        meta = StreamMeta(0, program.n_sweep_points, program.inner_reps,
                          program.clock, meta_key, meta_start)
        return InstructionStream(meta, (Halt(),))

    frame = shot_frame_cycles(program)
    n_points = program.n_sweep_points
    reps = program.inner_reps
    need_sync = n_points * reps > 1

    ordered = sorted(
        program.events,
        key=lambda ev: (ev.start.at(_r0(program)), ev.channel, ev.length.at(_r0(program))),
    )

    out: list = []
    params: dict[tuple[int, str], Affine] = {}

    def set_param(channel: int, name: str, value: Affine):
        if params.get((channel, name)) != value:
            params[(channel, name)] = value
            out.append(SetParam(channel, name, value))

    def emit_settings(events, r=None):
        # Channel state is established before the shot body so the rep
        # loop replays only the timed instructions.
        for ev in events:
            if isinstance(ev.payload, MicrowavePulse):
                p = ev.payload if r is None else ev.payload.concrete(r)
                set_param(ev.channel, PARAM_FREQUENCY, p.frequency_hz)
                set_param(ev.channel, PARAM_GAIN, p.gain)
                set_param(ev.channel, PARAM_PHASE, Affine(p.phase_deg))

    def emit_shot(events, r=None):
        for ev in events:
            start = ev.start if r is None else Affine(ev.start.at_cycles(r))
            length = ev.length if r is None else Affine(ev.length.at_cycles(r))
            if isinstance(ev.payload, TriggerWindow):
                out.append(Trigger(ev.channel, start, length, ev.payload.tag))
            elif isinstance(ev.payload, MicrowavePulse):
                out.append(Play(ev.channel, start, length, ev.payload.envelope))
            elif isinstance(ev.payload, LaserPulse):
                out.append(Play(ev.channel, start, length))
            else:
                raise ProgramError(f"unsupported payload {ev.payload!r}")
        if need_sync:
            out.append(Sync(frame))

    def emit_point(events, r=None):
        emit_settings(events, r)
        if reps > 1:
            out.append(LoopBegin(reps))
        emit_shot(events, r)
        if reps > 1:
            out.append(LoopEnd())

    if sweep is None:
        emit_point(ordered)
    elif sweep.linear:
        if n_points > 1:
            out.append(LoopBegin(n_points))
        emit_point(ordered)
        out.append(SweepStep(sweep.step))
        if n_points > 1:
            out.append(LoopEnd())
    else:
        for i in range(n_points):
            emit_point(ordered, sweep.values[i])
            out.append(SweepStep(0))
    out.append(Halt())

    meta = StreamMeta(frame * n_points * reps, n_points, reps,
                      program.clock, meta_key, meta_start)
    return InstructionStream(meta, tuple(out))


def _r0(program: PulseProgram):
    return program.register_values()[0]


@dataclass(frozen=True)
class ShotEvent:
    """One concrete timed event recovered from a stream.

    ``start`` is shot-relative; ``sweep_index`` / ``rep_index`` place
    the shot within the acquisition.
    """

    sweep_index: int
    rep_index: int
    channel: int
    start: int
    length: int
    payload: Payload


@dataclass(frozen=True)
class ShotGroup:
    """A run of ``rep_count`` consecutive identical shots at one sweep
    point; repetition loops collapse to one entry so executing large
    averaged acquisitions stays cheap."""

    sweep_index: int
    rep_start: int
    rep_count: int
    events: tuple[tuple[int, int, int, Payload], ...]  # channel, start, length


def decompile(stream: InstructionStream) -> list[ShotEvent]:
    """Interpret a stream back into concrete events, one per executed
    PLAY/TRIGGER, with all loops unrolled. Raises MalformedStreamError
    for structural problems: unbalanced or over-nested loops, a missing
    HALT, or trailing instructions after it."""
    out: list[ShotEvent] = []
    for g in decompile_grouped(stream):
        for i in range(g.rep_count):
            for channel, start, length, payload in g.events:
                out.append(ShotEvent(
                    g.sweep_index, g.rep_start + i, channel, start, length, payload,
                ))
    return out


def decompile_grouped(stream: InstructionStream) -> list[ShotGroup]:
    """Same interpretation as decompile, but a repetition loop whose
    body is pure shot playback (PLAY/TRIGGER closed by one SYNC) is
    evaluated once and reported with its repeat count."""
    meta = stream.meta
    groups: list[ShotGroup] = []
    params: dict[tuple[int, str], Affine] = {}
    # R always equals sweep_start + k*increment for the k'th SWEEP_STEP
    # executed; no accumulation, so swept operands evaluate to the same
    # float at every visit of a sweep point.
    r = meta.sweep_start
    sweep_index = 0
    rep_index = 0
    steps_taken = 0
    acc: list[tuple[int, int, int, Payload]] = []

    def flush():
        nonlocal acc
        if acc:
            groups.append(ShotGroup(sweep_index, rep_index, 1, tuple(acc)))
            acc = []

    loop_stack: list[list] = []  # [pc_of_first_body_instruction, remaining]
    instructions = stream.instructions
    pc = 0
    halted = False
    executed = 0
    budget = 50_000_000  # hard stop for runaway streams
    while pc < len(instructions):
        if halted:
            raise MalformedStreamError("instructions after HALT")
        ins = instructions[pc]
        executed += 1
        if executed > budget:
            raise MalformedStreamError("stream did not halt")
        if isinstance(ins, SetParam):
            params[(ins.channel, ins.param)] = ins.value
        elif isinstance(ins, Play):
            acc.append(_play_event(ins, params, r))
        elif isinstance(ins, Trigger):
            acc.append((
                ins.channel, ins.start.at_cycles(r), ins.length.at_cycles(r),
                TriggerWindow(ins.tag),
            ))
        elif isinstance(ins, Sync):
            flush()
            rep_index += 1
        elif isinstance(ins, SweepStep):
            flush()
            steps_taken += 1
            r = meta.sweep_start + steps_taken * ins.increment
            sweep_index += 1
            rep_index = 0
        elif isinstance(ins, LoopBegin):
            if ins.count < 1:
                raise MalformedStreamError(f"loop count {ins.count} < 1")
            if len(loop_stack) >= MAX_LOOP_DEPTH:
                raise MalformedStreamError("loops nested deeper than 2")
            end_pc = _shot_loop_end(instructions, pc)
            if end_pc is not None and not acc:
                shot = [
                    _play_event(b, params, r) if isinstance(b, Play)
                    else (b.channel, b.start.at_cycles(r), b.length.at_cycles(r),
                          TriggerWindow(b.tag))
                    for b in instructions[pc + 1: end_pc - 1]
                ]
                groups.append(ShotGroup(sweep_index, rep_index, ins.count, tuple(shot)))
                rep_index += ins.count
                pc = end_pc + 1
                continue
            loop_stack.append([pc + 1, ins.count])
        elif isinstance(ins, LoopEnd):
            if not loop_stack:
                raise MalformedStreamError("LOOP_END without LOOP_BEGIN")
            loop_stack[-1][1] -= 1
            if loop_stack[-1][1] > 0:
                pc = loop_stack[-1][0]
                continue
            loop_stack.pop()
        elif isinstance(ins, Halt):
            if loop_stack:
                raise MalformedStreamError("HALT inside an open loop")
            flush()
            halted = True
        else:
            raise MalformedStreamError(f"unknown instruction {ins!r}")
        pc += 1
    if not halted:
        raise MalformedStreamError("stream has no HALT")
    return groups


def _shot_loop_end(instructions, begin_pc: int) -> int | None:
    """Index of the LOOP_END closing a collapsible repetition loop:
    the body must be PLAY/TRIGGER instructions closed by exactly one
    trailing SYNC (the shot boundary). Anything else returns None and
    the loop is interpreted iteration by iteration."""
    pc = begin_pc + 1
    while pc < len(instructions):
        ins = instructions[pc]
        if isinstance(ins, LoopEnd):
            body = instructions[begin_pc + 1: pc]
            if body and isinstance(body[-1], Sync) and all(
                isinstance(b, (Play, Trigger)) for b in body[:-1]
            ):
                return pc
            return None
        if not isinstance(ins, (Play, Trigger, Sync)):
            return None
        pc += 1
    return None


def _play_event(ins: Play, params, r) -> tuple[int, int, int, Payload]:
    freq = params.get((ins.channel, PARAM_FREQUENCY))
    if freq is not None:
        gain = params.get((ins.channel, PARAM_GAIN), Affine(0.0))
        phase = params.get((ins.channel, PARAM_PHASE), Affine(0.0))
        payload: Payload = MicrowavePulse(
            Affine(freq.at(r)), Affine(gain.at(r)), phase.at(r), ins.shape,
        )
    else:
        payload = LaserPulse()
    return (ins.channel, ins.start.at_cycles(r), ins.length.at_cycles(r), payload)
