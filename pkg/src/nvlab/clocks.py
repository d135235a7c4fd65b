"""Clock domains and time quantization.

Everything timed in this package is expressed in integer cycles of the
generator clock; the readout clock only matters for analog sample rates
and for the sync-epoch relationship between the two domains.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

# Round defaults keep desk arithmetic exact: 1 generator cycle = 2.5 ns.
DEFAULT_GENERATOR_CLOCK_HZ = 400e6
DEFAULT_READOUT_CLOCK_HZ = 1e9
DEFAULT_CYCLES_PER_SYNC_EPOCH = 8


def ns_to_cycles(duration_ns: float, clock_hz: float) -> int:
    """Quantize a duration to whole clock cycles.

    Rounds to nearest, ties away from zero, so the timing error is at
    most half a clock period.
    """
    if not (math.isfinite(duration_ns) and math.isfinite(clock_hz)):
        raise ValueError("duration and clock must be finite")
    if duration_ns < 0:
        raise ValueError(f"duration must be >= 0 ns, got {duration_ns}")
    if clock_hz <= 0:
        raise ValueError(f"clock must be > 0 Hz, got {clock_hz}")
    return int(math.floor(duration_ns * clock_hz / 1e9 + 0.5))


def cycles_to_ns(cycles: int, clock_hz: float) -> float:
    if cycles < 0:
        raise ValueError(f"cycles must be >= 0, got {cycles}")
    if clock_hz <= 0:
        raise ValueError(f"clock must be > 0 Hz, got {clock_hz}")
    return cycles * 1e9 / clock_hz


@dataclass(frozen=True)
class ClockSpec:
    """Generator/readout clock pair plus their sync-epoch alignment.

    ``cycles_per_sync_epoch`` is the generator-cycle granularity on
    which the two clock domains realign; shot boundaries are padded to
    a multiple of it.
    """

    generator_clock_hz: float = DEFAULT_GENERATOR_CLOCK_HZ
    readout_clock_hz: float = DEFAULT_READOUT_CLOCK_HZ
    cycles_per_sync_epoch: int = DEFAULT_CYCLES_PER_SYNC_EPOCH

    def __post_init__(self):
        if self.generator_clock_hz <= 0 or self.readout_clock_hz <= 0:
            raise ValueError("clock frequencies must be strictly positive")
        if self.cycles_per_sync_epoch < 1:
            raise ValueError("cycles_per_sync_epoch must be >= 1")

    def to_cycles(self, duration_ns: float) -> int:
        return ns_to_cycles(duration_ns, self.generator_clock_hz)

    def to_ns(self, cycles: int) -> float:
        return cycles_to_ns(cycles, self.generator_clock_hz)

    def align_up(self, cycles: int) -> int:
        """Round up to the next sync-epoch multiple."""
        epoch = self.cycles_per_sync_epoch
        return -(-cycles // epoch) * epoch

    @property
    def readout_samples_per_cycle(self) -> float:
        return self.readout_clock_hz / self.generator_clock_hz
