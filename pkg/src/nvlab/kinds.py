"""The seven standardized measurement kinds."""

from __future__ import annotations

import enum


class MeasurementKind(enum.Enum):
    PL_INTENSITY = "pl"
    ODMR = "odmr"
    READOUT_WINDOW = "readout-window"
    RABI = "rabi"
    RAMSEY = "ramsey"
    HAHN_ECHO = "hahn-echo"
    T1 = "t1"


_ALIASES = {
    "pl": MeasurementKind.PL_INTENSITY,
    "pl-intensity": MeasurementKind.PL_INTENSITY,
    "plintensity": MeasurementKind.PL_INTENSITY,
    "odmr": MeasurementKind.ODMR,
    "readout-window": MeasurementKind.READOUT_WINDOW,
    "readoutwindow": MeasurementKind.READOUT_WINDOW,
    "rabi": MeasurementKind.RABI,
    "ramsey": MeasurementKind.RAMSEY,
    "hahn-echo": MeasurementKind.HAHN_ECHO,
    "hahn": MeasurementKind.HAHN_ECHO,
    "hahnecho": MeasurementKind.HAHN_ECHO,
    "t1": MeasurementKind.T1,
}


def parse_kind(name: str) -> MeasurementKind:
    key = name.strip().lower().replace("_", "-")
    try:
        return _ALIASES[key]
    except KeyError:
        known = ", ".join(k.value for k in MeasurementKind)
        raise ValueError(f"unknown measurement kind {name!r}; expected one of: {known}")
