"""Deterministic virtual instrument.

Executes an instruction stream against the NV model and returns one
acquisition record per triggered readout window. Execution is
event-driven: each shot's stimulus timeline (laser spans, microwave
pulse groups, dark gaps) is reduced to a closed-form population
trajectory, and window counts are Poisson draws around the analytic
expectation. Identical (stream, physics, seed) triples replay
bit-identically; the generator is counter-based (Philox) so replay
holds across platforms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from .compiler import decompile_grouped
from .errors import PhysicsError
from .isa import InstructionStream
from .physics import (
    NvEnsembleParams,
    expected_window_photons,
    odmr_pl_rate,
    rabi_p0,
    repolarized_p0,
    t1_p0,
)
from .program import LaserPulse, MicrowavePulse, TriggerWindow

MODE_PHOTON = "photon-count"
MODE_ANALOG = "analog"

#: Analog level per Hz of PL rate; the absolute scale is arbitrary
#: units by declaration (1.0 per MHz keeps plots near unity).
ANALOG_UNITS_PER_HZ = 1e-6

DEFAULT_DARK_RATE_HZ = 200.0
P0_SHOT_START = 1.0  # each shot follows a laser-terminated predecessor


@dataclass(frozen=True)
class AcquisitionRecord:
    sweep_index: int
    rep_index: int
    window_tag: str
    start_cycle: int
    length_cycles: int
    mode: str = MODE_PHOTON
    photon_count: int = 0
    analog_samples: tuple[float, ...] = ()


@dataclass
class InstrumentState:
    """Mutable execution context for one stream run."""

    physics: NvEnsembleParams
    rng_seed: int
    cycle_clock: int = 0
    laser_on: bool = False
    registers: dict = field(default_factory=dict)


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed))


def count_photons(rate_hz: float, window_ns: float, efficiency: float, rng) -> int:
    """One Poisson draw of detected photons in a window."""
    if rate_hz < 0 or window_ns < 0:
        raise PhysicsError("rate and window must be non-negative")
    if not 0 <= efficiency <= 1:
        raise PhysicsError(f"efficiency must be in [0, 1], got {efficiency!r}")
    lam = rate_hz * window_ns * 1e-9 * efficiency
    return int(rng.poisson(lam))


def sample_analog(
    rate_hz: float,
    window_ns: float,
    noise_sigma: float,
    rng,
    readout_clock_hz: float = 1e9,
) -> list[float]:
    """One analog sample per readout-clock cycle: a rate-proportional
    DC level plus zero-mean gaussian noise."""
    if rate_hz < 0 or window_ns < 0:
        raise PhysicsError("rate and window must be non-negative")
    if noise_sigma < 0:
        raise PhysicsError(f"noise_sigma must be >= 0, got {noise_sigma!r}")
    n = int(math.floor(window_ns * readout_clock_hz * 1e-9 + 0.5))
    level = rate_hz * ANALOG_UNITS_PER_HZ
    if noise_sigma == 0:
        return [level] * n
    return (level + rng.normal(0.0, noise_sigma, size=n)).tolist()


# ---------------------------------------------------------------------------
# Shot evaluation: stimulus timeline -> expected window photons

@dataclass(frozen=True)
class _Window:
    tag: str
    start_cycle: int
    length_cycles: int
    expected_pl: float  # photons before efficiency and dark counts


def _merge_spans(spans: list[tuple[int, int]]) -> list[tuple[int, int]]:
    merged: list[list[int]] = []
    for a, b in sorted(spans):
        if merged and a <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], b)
        else:
            merged.append([a, b])
    return [(a, b) for a, b in merged]


def _group_pulses(mws, lasers):
    """Maximal runs of microwave pulses with no laser activity in the
    gaps between them; gaps inside a group evolve coherently."""
    groups: list[list] = []
    for p in mws:
        if groups:
            prev_end = groups[-1][-1][1]
            gap_blocked = any(ls < p[0] and le > prev_end for ls, le in lasers)
            if not gap_blocked:
                groups[-1].append(p)
                continue
        groups.append([p])
    return groups


def evaluate_shot(events, params: NvEnsembleParams, generator_clock_hz: float) -> list[_Window]:
    """Expected PL photons for every trigger window of one shot.

    ``events`` is an iterable of (channel, start_cycle, length_cycles,
    payload). Times stay in integer generator cycles until a physics
    call needs ns, so gap comparisons (echo symmetry) are exact.
    """
    to_ns = 1e9 / generator_clock_hz

    lasers: list[tuple[int, int]] = []
    mws: list[tuple[int, int, float, float]] = []  # start, end, freq, omega
    triggers: list[tuple[int, int, str]] = []
    for _channel, start, length, payload in events:
        if isinstance(payload, LaserPulse):
            lasers.append((start, start + length))
        elif isinstance(payload, MicrowavePulse):
            omega = params.rabi_rate_hz * payload.gain.at(0)
            if omega != 0.0:
                mws.append((start, start + length, payload.frequency_hz.at(0), omega))
        elif isinstance(payload, TriggerWindow):
            triggers.append((start, length, payload.tag))
    lasers = _merge_spans(lasers)
    mws.sort()
    triggers.sort()

    cw = any(ms < le and me > ls for ms, me, _, _ in mws for ls, le in lasers)
    if cw:
        return _evaluate_cw(triggers, lasers, mws, params, to_ns)

    # Pulsed: walk laser spans and pulse groups in time order, tracking
    # the ms=0 population; dark gaps relax toward the thermal mixture.
    blocks: list[tuple[int, int, str, object]] = []
    for a, b in lasers:
        blocks.append((a, b, "laser", None))
    for group in _group_pulses(mws, lasers):
        blocks.append((group[0][0], group[-1][1], "mw", group))
    blocks.sort(key=lambda blk: blk[0])

    cursor = 0
    p0 = P0_SHOT_START
    segments: list[tuple[int, int, float]] = []  # laser span + entry population
    for a, b, kind, group in blocks:
        if a > cursor:
            p0 = t1_p0((a - cursor) * to_ns, p0, params)
        if kind == "laser":
            segments.append((a, b, p0))
            p0 = repolarized_p0(p0, (b - a) * to_ns, params)
        else:
            p0 = _apply_group(group, p0, params, to_ns)
        cursor = max(cursor, b)

    out = []
    for w0, length, tag in triggers:
        w1 = w0 + length
        lam = 0.0
        for a, b, p0_on in segments:
            lo, hi = max(w0, a), min(w1, b)
            if lo < hi:
                lam += expected_window_photons(
                    p0_on, (lo - a) * to_ns, (hi - a) * to_ns, params
                )
        out.append(_Window(tag, w0, length, lam))
    return out


def _evaluate_cw(triggers, lasers, mws, params, to_ns) -> list[_Window]:
    """Laser and microwave on together: steady-state ODMR rates."""
    out = []
    for w0, length, tag in triggers:
        w1 = w0 + length
        covering = next((m for m in mws if m[0] < w1 and m[1] > w0), mws[0])
        rate = odmr_pl_rate(covering[2], params)
        overlap = sum(max(0, min(w1, b) - max(w0, a)) for a, b in lasers)
        out.append(_Window(tag, w0, length, rate * overlap * to_ns * 1e-9))
    return out


def _apply_group(group, p0: float, params: NvEnsembleParams, to_ns: float) -> float:
    freqs = {g[2] for g in group}
    if len(group) == 2 and len(freqs) == 1:
        # free-induction pair: coherent phase accumulation in the gap
        tau_s = (group[1][0] - group[0][1]) * to_ns * 1e-9
        delta = params.detuning_hz(group[0][2])
        coh = math.cos(2.0 * math.pi * delta * tau_s) * math.exp(
            -((tau_s / params.t2_star_s) ** 2)
        )
        return 0.5 * (1.0 + (2.0 * p0 - 1.0) * coh)
    if len(group) == 3 and len(freqs) == 1:
        gap1 = group[1][0] - group[0][1]
        gap2 = group[2][0] - group[1][1]
        if gap1 == gap2:
            # refocused echo: static detuning cancels, only T2 remains
            total_s = (gap1 + gap2) * to_ns * 1e-9
            coh = math.exp(-((total_s / params.t2_s) ** params.stretch_t2))
            return 0.5 * (1.0 + (2.0 * p0 - 1.0) * coh)
    # anything else: fold pulses one at a time, relaxing across gaps
    cursor = group[0][0]
    for start, end, freq, omega in group:
        if start > cursor:
            p0 = t1_p0((start - cursor) * to_ns, p0, params)
        transfer = 1.0 - rabi_p0((end - start) * to_ns, omega, params.detuning_hz(freq))
        p0 = p0 * (1.0 - transfer) + (1.0 - p0) * transfer
        cursor = end
    return p0


# ---------------------------------------------------------------------------
# Execution

def _shot_layout(
    stream: InstructionStream, physics: NvEnsembleParams
) -> list[tuple[int, int, int, list[_Window]]]:
    """(sweep_index, rep_start, rep_count, windows) per distinct shot.

    Identical shots (every repetition at a sweep point, usually) share
    one physics evaluation; shots without trigger windows are dropped.
    """
    clock_hz = stream.meta.clock.generator_clock_hz
    cache: dict[tuple, list[_Window]] = {}
    layout: list[tuple[int, int, int, list[_Window]]] = []
    for g in decompile_grouped(stream):
        windows = cache.get(g.events)
        if windows is None:
            windows = evaluate_shot(g.events, physics, clock_hz)
            cache[g.events] = windows
        if windows:
            layout.append((g.sweep_index, g.rep_start, g.rep_count, windows))
    return layout


def execute(
    stream: InstructionStream,
    physics: NvEnsembleParams,
    seed: int,
    mode: str = MODE_PHOTON,
    efficiency: float = 1.0,
    dark_rate_hz: float = DEFAULT_DARK_RATE_HZ,
    analog_noise_sigma: float = 0.05,
) -> list[AcquisitionRecord]:
    """Run a stream and return one record per trigger window, ordered by
    (sweep_index, rep_index, start_cycle)."""
    if mode not in (MODE_PHOTON, MODE_ANALOG):
        raise ValueError(f"unknown mode {mode!r}")
    if dark_rate_hz < 0:
        raise PhysicsError("dark_rate_hz must be >= 0")
    if not 0 <= efficiency <= 1:
        raise PhysicsError(f"efficiency must be in [0, 1], got {efficiency!r}")

    state = InstrumentState(physics=physics, rng_seed=seed)
    clock = stream.meta.clock
    layout = _shot_layout(stream, physics)

    state.cycle_clock = stream.meta.total_cycles
    rng = make_rng(seed)
    records: list[AcquisitionRecord] = []

    if mode == MODE_PHOTON:
        lam_parts = [
            np.tile(
                [
                    efficiency * w.expected_pl
                    + dark_rate_hz * clock.to_ns(w.length_cycles) * 1e-9
                    for w in windows
                ],
                count,
            )
            for _, _, count, windows in layout
        ]
        lams = np.concatenate(lam_parts) if lam_parts else np.array([])
        counts = rng.poisson(lams)
        i = 0
        for sweep_i, rep_start, count, windows in layout:
            for rep in range(rep_start, rep_start + count):
                for w in windows:
                    records.append(AcquisitionRecord(
                        sweep_i, rep, w.tag, w.start_cycle, w.length_cycles,
                        MODE_PHOTON, int(counts[i]),
                    ))
                    i += 1
    else:
        for sweep_i, rep_start, count, windows in layout:
            for rep in range(rep_start, rep_start + count):
                for w in windows:
                    window_ns = clock.to_ns(w.length_cycles)
                    mean_rate = (
                        efficiency * w.expected_pl / (window_ns * 1e-9) + dark_rate_hz
                        if window_ns > 0 else 0.0
                    )
                    samples = sample_analog(
                        mean_rate, window_ns, analog_noise_sigma, rng,
                        readout_clock_hz=clock.readout_clock_hz,
                    )
                    records.append(AcquisitionRecord(
                        sweep_i, rep, w.tag, w.start_cycle, w.length_cycles,
                        MODE_ANALOG, 0, tuple(samples),
                    ))
    return records


def execute_iter(
    stream: InstructionStream,
    physics: NvEnsembleParams,
    seed: int,
    mode: str = MODE_PHOTON,
    efficiency: float = 1.0,
    dark_rate_hz: float = DEFAULT_DARK_RATE_HZ,
    analog_noise_sigma: float = 0.05,
) -> "Iterator[AcquisitionRecord]":
    """Single-producer streaming form of execute.

    Yields the exact records execute would return, in the same order, so
    a consumer can forward sweep points as they complete without holding
    the full record list.
    """
    yield from execute(
        stream, physics, seed, mode=mode, efficiency=efficiency,
        dark_rate_hz=dark_rate_hz, analog_noise_sigma=analog_noise_sigma,
    )


def execute_binned(
    stream: InstructionStream,
    physics: NvEnsembleParams,
    seed: int,
    mode: str = MODE_PHOTON,
    efficiency: float = 1.0,
    dark_rate_hz: float = DEFAULT_DARK_RATE_HZ,
    analog_noise_sigma: float = 0.05,
) -> dict[tuple[int, str], tuple[float, int]]:
    """Like execute(), but reduced on the fly to per-(sweep point,
    window tag) totals: ``{(sweep_index, tag): (total, n_windows)}``
    where the total is summed photon counts (photon mode) or summed
    per-window mean levels (analog mode).

    Draws the same random numbers in the same order as execute(), so
    total/n_windows equals the mean over the corresponding records of
    an execute() call with the same seed.
    """
    if mode not in (MODE_PHOTON, MODE_ANALOG):
        raise ValueError(f"unknown mode {mode!r}")
    if dark_rate_hz < 0:
        raise PhysicsError("dark_rate_hz must be >= 0")
    if not 0 <= efficiency <= 1:
        raise PhysicsError(f"efficiency must be in [0, 1], got {efficiency!r}")

    clock = stream.meta.clock
    layout = _shot_layout(stream, physics)
    rng = make_rng(seed)
    bins: dict[tuple[int, str], tuple[float, int]] = {}

    def add(key, total, n):
        prev = bins.get(key)
        if prev is None:
            bins[key] = (total, n)
        else:
            bins[key] = (prev[0] + total, prev[1] + n)

    if mode == MODE_PHOTON:
        lam_parts = [
            np.tile(
                [
                    efficiency * w.expected_pl
                    + dark_rate_hz * clock.to_ns(w.length_cycles) * 1e-9
                    for w in windows
                ],
                count,
            )
            for _, _, count, windows in layout
        ]
        lams = np.concatenate(lam_parts) if lam_parts else np.array([])
        counts = rng.poisson(lams)
        i = 0
        for sweep_i, _rep_start, count, windows in layout:
            k = len(windows)
            block = counts[i : i + count * k].reshape(count, k).sum(axis=0)
            i += count * k
            for j, w in enumerate(windows):
                add((sweep_i, w.tag), float(block[j]), count)
    else:
        for sweep_i, _rep_start, count, windows in layout:
            for _rep in range(count):
                for w in windows:
                    window_ns = clock.to_ns(w.length_cycles)
                    mean_rate = (
                        efficiency * w.expected_pl / (window_ns * 1e-9) + dark_rate_hz
                        if window_ns > 0 else 0.0
                    )
                    samples = sample_analog(
                        mean_rate, window_ns, analog_noise_sigma, rng,
                        readout_clock_hz=clock.readout_clock_hz,
                    )
                    level = sum(samples) / len(samples) if samples else 0.0
                    add((sweep_i, w.tag), level, 1)
    return bins
