"""Instrument channels and their frequency bands."""

from __future__ import annotations

import enum
from dataclasses import dataclass

MICROWAVE_BAND_DEFAULT = (6e9, 10e9)
DIGITIZER_BAND_DEFAULT = (0.0, 1e9)
# Gate/trigger lines carry no RF content; a wide nominal band keeps the
# invariant band_low < band_high without implying anything physical.
BASEBAND_DEFAULT = (0.0, 1e9)


class ChannelKind(enum.Enum):
    MICROWAVE = "microwave-generator"
    LASER = "laser-gate"
    TRIGGER = "readout-trigger"
    DIGITIZER = "digitizer"


_BAND_DEFAULTS = {
    ChannelKind.MICROWAVE: MICROWAVE_BAND_DEFAULT,
    ChannelKind.LASER: BASEBAND_DEFAULT,
    ChannelKind.TRIGGER: BASEBAND_DEFAULT,
    ChannelKind.DIGITIZER: DIGITIZER_BAND_DEFAULT,
}


@dataclass(frozen=True)
class Channel:
    id: int
    kind: ChannelKind
    band_low_hz: float = None  # type: ignore[assignment]  # filled per kind
    band_high_hz: float = None  # type: ignore[assignment]

    def __post_init__(self):
        low, high = _BAND_DEFAULTS[self.kind]
        if self.band_low_hz is None:
            object.__setattr__(self, "band_low_hz", low)
        if self.band_high_hz is None:
            object.__setattr__(self, "band_high_hz", high)
        if not self.band_low_hz < self.band_high_hz:
            raise ValueError(
                f"channel {self.id}: band_low must be < band_high, "
                f"got [{self.band_low_hz}, {self.band_high_hz}]"
            )

    def in_band(self, freq_hz: float) -> bool:
        return self.band_low_hz <= freq_hz <= self.band_high_hz


# Fixed ids for the standard four-channel instrument profile.
CH_MICROWAVE = 0
CH_LASER = 1
CH_TRIGGER = 2
CH_DIGITIZER = 3


def default_channels(mw_band: tuple[float, float] | None = None) -> tuple[Channel, ...]:
    """The standard profile: one generator, one laser gate, one trigger
    port, one digitizer. ``mw_band`` overrides the generator band."""
    if mw_band is None:
        mw = Channel(CH_MICROWAVE, ChannelKind.MICROWAVE)
    else:
        mw = Channel(CH_MICROWAVE, ChannelKind.MICROWAVE, mw_band[0], mw_band[1])
    return (
        mw,
        Channel(CH_LASER, ChannelKind.LASER),
        Channel(CH_TRIGGER, ChannelKind.TRIGGER),
        Channel(CH_DIGITIZER, ChannelKind.DIGITIZER),
    )
