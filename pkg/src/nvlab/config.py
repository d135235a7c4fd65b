"""Experiment configuration: typed key-value entries, the text file
grammar, and per-measurement validation.

File grammar (one entry per line)::

    # comment
    key = value

where ``value`` is a number with an optional unit suffix (``ns``,
``us``, ``ms``, ``s``, ``Hz``, ``kHz``, ``MHz``, ``GHz``), a bare
integer/float, ``true``/``false``, or a bare word. Durations are stored
canonically in ns, frequencies in Hz. Validation never raises: every
problem is collected into a ValidationReport.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

from .channels import Channel, ChannelKind, default_channels
from .kinds import MeasurementKind

# Scale factors to the canonical unit of each dimension (ns, Hz).
_TIME_UNITS = {"ns": 1.0, "us": 1e3, "ms": 1e6, "s": 1e9}
_FREQ_UNITS = {"hz": 1.0, "khz": 1e3, "mhz": 1e6, "ghz": 1e9}

_NUMBER_RE = re.compile(
    r"^([+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)\s*([A-Za-z]*)$"
)

ConfigValue = float | int | bool | str


def parse_value(text: str) -> ConfigValue:
    """Parse one right-hand side of the config grammar."""
    text = text.strip()
    low = text.lower()
    if low == "true":
        return True
    if low == "false":
        return False
    m = _NUMBER_RE.match(text)
    if m is None:
        return text  # bare word / enum value
    num, unit = m.group(1), m.group(2).lower()
    if unit == "":
        try:
            return int(num)
        except ValueError:
            return float(num)
    if unit in _TIME_UNITS:
        return float(num) * _TIME_UNITS[unit]
    if unit in _FREQ_UNITS:
        return float(num) * _FREQ_UNITS[unit]
    raise ValueError(f"unknown unit suffix {unit!r} in {text!r}")


def format_value(value: ConfigValue, kind: str | None = None) -> str:
    """Inverse of parse_value. ``kind`` picks the unit suffix."""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, str):
        return value
    if kind in ("duration", "signed_duration"):
        return f"{float(value)!r} ns"
    if kind == "frequency":
        return f"{float(value)!r} Hz"
    if isinstance(value, int):
        return str(value)
    return repr(float(value))


# ---------------------------------------------------------------------------
# Schemas

#: Value kinds a schema key can declare. ``frequency`` keys are checked
#: against the microwave channel band; ``duration`` must be >= 0 ns;
#: ``signed_duration`` is a time offset allowed to be negative;
#: ``count`` must be an integer >= 1; ``gain`` lies in [0, 1].
KEY_KINDS = ("frequency", "duration", "signed_duration", "gain", "count", "flag", "choice")


@dataclass(frozen=True)
class KeySpec:
    name: str
    kind: str
    required: bool = True
    default: ConfigValue | None = None
    choices: tuple[str, ...] = ()
    help: str = ""

    def __post_init__(self):
        if self.kind not in KEY_KINDS:
            raise ValueError(f"bad key kind {self.kind!r} for {self.name!r}")


@dataclass(frozen=True)
class ConfigSchema:
    kind: MeasurementKind
    keys: tuple[KeySpec, ...]

    def spec_for(self, name: str) -> KeySpec | None:
        for k in self.keys:
            if k.name == name:
                return k
        return None

    @property
    def required_keys(self) -> tuple[str, ...]:
        return tuple(k.name for k in self.keys if k.required)


# ---------------------------------------------------------------------------
# Validation report

@dataclass(frozen=True)
class BandViolation:
    key: str
    value: float
    band_low: float
    band_high: float
    domain: str  # e.g. "microwave-generator band" or "gain range"

    def __str__(self):
        return (
            f"{self.key} = {self.value!r} outside {self.domain} "
            f"[{self.band_low}, {self.band_high}]"
        )


@dataclass(frozen=True)
class ValidationReport:
    missing_keys: tuple[str, ...] = ()
    out_of_band: tuple[BandViolation, ...] = ()
    warnings: tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.missing_keys and not self.out_of_band

    def summary(self) -> str:
        if self.ok and not self.warnings:
            return "ok"
        lines = []
        for k in self.missing_keys:
            lines.append(f"missing: {k}")
        for v in self.out_of_band:
            lines.append(f"out of band: {v}")
        for w in self.warnings:
            lines.append(f"warning: {w}")
        return "\n".join(lines)


# ---------------------------------------------------------------------------
# ExperimentConfig

#: Keys understood everywhere, never reported as unknown.
COMMON_OPTIONAL_KEYS = ("mw_band_low", "mw_band_high")


@dataclass(frozen=True)
class ExperimentConfig:
    """Immutable keyed parameter set for one measurement program."""

    entries: dict[str, ConfigValue]
    measurement_kind: MeasurementKind | None = None
    channels: tuple[Channel, ...] = field(default_factory=default_channels)

    def __post_init__(self):
        # Band overrides travel inside the entries so config files stay flat.
        lo = self.entries.get("mw_band_low")
        hi = self.entries.get("mw_band_high")
        if lo is not None or hi is not None:
            mu = self.microwave_channel()
            band = (
                float(lo) if lo is not None else mu.band_low_hz,
                float(hi) if hi is not None else mu.band_high_hz,
            )
            object.__setattr__(self, "channels", default_channels(mw_band=band))

    def microwave_channel(self) -> Channel:
        for ch in self.channels:
            if ch.kind is ChannelKind.MICROWAVE:
                return ch
        raise LookupError("no microwave channel in profile")

    def get(self, key: str, default=None):
        return self.entries.get(key, default)

    def __contains__(self, key: str) -> bool:
        return key in self.entries

    def number(self, key: str) -> float:
        v = self.entries[key]
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise TypeError(f"config key {key!r} is not numeric: {v!r}")
        return float(v)

    def integer(self, key: str) -> int:
        return int(self.number(key))

    def flag(self, key: str, default: bool = False) -> bool:
        v = self.entries.get(key, default)
        return bool(v)

    def with_entries(self, **overrides: ConfigValue) -> "ExperimentConfig":
        merged = dict(self.entries)
        merged.update(overrides)
        return ExperimentConfig(merged, self.measurement_kind, self.channels)

    # -- text format --------------------------------------------------------

    @classmethod
    def from_text(
        cls, text: str, measurement_kind: MeasurementKind | None = None
    ) -> "ExperimentConfig":
        entries: dict[str, ConfigValue] = {}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"line {lineno}: expected 'key = value', got {raw!r}")
            key, val = line.split("=", 1)
            key = key.strip()
            if not key:
                raise ValueError(f"line {lineno}: empty key")
            entries[key] = parse_value(val)
        return cls(entries, measurement_kind)

    def to_text(self, schema: ConfigSchema | None = None) -> str:
        lines = []
        for key in sorted(self.entries):
            spec = schema.spec_for(key) if schema is not None else None
            kind = spec.kind if spec is not None else None
            lines.append(f"{key} = {format_value(self.entries[key], kind)}")
        return "\n".join(lines) + "\n"


def validate_config(config: ExperimentConfig, schema: ConfigSchema) -> ValidationReport:
    """Check a config against the required-key schema of its measurement.

    Missing or wrong-typed required keys land in ``missing_keys``; range
    and band violations in ``out_of_band`` (a gain outside [0, 1] is out
    of its band just like a frequency outside the generator band);
    unknown extra keys only produce warnings.
    """
    missing: list[str] = []
    violations: list[BandViolation] = []
    warnings: list[str] = []

    mw = config.microwave_channel()

    for spec in schema.keys:
        if spec.name not in config.entries:
            if spec.required:
                missing.append(spec.name)
            continue
        value = config.entries[spec.name]
        problem = _check_value(spec, value, mw)
        if problem is None:
            continue
        if isinstance(problem, BandViolation):
            violations.append(problem)
        else:
            # Unusable type: the key is effectively missing.
            missing.append(spec.name)
            warnings.append(problem)

    known = {k.name for k in schema.keys} | set(COMMON_OPTIONAL_KEYS)
    for key in config.entries:
        if key not in known:
            warnings.append(f"unknown key {key!r} ignored")

    return ValidationReport(tuple(missing), tuple(violations), tuple(warnings))


def _check_value(spec: KeySpec, value: ConfigValue, mw: Channel):
    """Returns None if fine, a BandViolation, or a warning string for a
    type mismatch."""
    kind = spec.kind
    if kind == "flag":
        if isinstance(value, bool):
            return None
        return f"{spec.name} expects true/false, got {value!r}"
    if kind == "choice":
        if isinstance(value, str) and (not spec.choices or value in spec.choices):
            return None
        return f"{spec.name} expects one of {spec.choices}, got {value!r}"

    if isinstance(value, bool) or not isinstance(value, (int, float)):
        return f"{spec.name} expects a number, got {value!r}"
    x = float(value)
    if not math.isfinite(x):
        return f"{spec.name} must be finite, got {value!r}"

    if kind == "frequency":
        if not mw.in_band(x):
            return BandViolation(
                spec.name, x, mw.band_low_hz, mw.band_high_hz,
                f"{mw.kind.value} band",
            )
    elif kind == "duration":
        if x < 0:
            return BandViolation(spec.name, x, 0.0, math.inf, "duration range (ns)")
    elif kind == "count":
        if x < 1 or x != int(x):
            return BandViolation(spec.name, x, 1, math.inf, "count range (integer)")
    elif kind == "gain":
        if not 0.0 <= x <= 1.0:
            return BandViolation(spec.name, x, 0.0, 1.0, "gain range")
    # signed_duration: any finite number is fine
    return None
