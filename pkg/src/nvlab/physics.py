"""Analytic NV-ensemble response model.

Two-level reduction (ms=0 against one addressed ms=+-1 branch) with
closed-form populations for each protocol; the virtual instrument
composes these primitives along a shot's stimulus timeline. All
populations are dimensionless in [0, 1]; rates are Hz; durations are
ns at the call boundary and converted internally.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace

from .config import parse_value
from .errors import PhysicsError

P0_EQUILIBRIUM = 1.0 / 3.0  # thermal mixture of the three ground-state sublevels


@dataclass(frozen=True)
class NvEnsembleParams:
    zero_field_splitting_hz: float = 2.87e9
    gyromagnetic_ratio_hz_per_t: float = 28.024e9
    bias_field_t: float = 0.0
    linewidth_hz: float = 8e6  # ODMR FWHM
    contrast: float = 0.30
    pl_rate_bright_hz: float = 1e6
    rabi_rate_hz: float = 5e6  # at unit gain
    t1_s: float = 5e-3
    t2_s: float = 100e-6
    t2_star_s: float = 1e-6
    stretch_t2: float = 1.0
    readout_settle_ns: float = 500.0

    def __post_init__(self):
        positive = {
            "zero_field_splitting_hz": self.zero_field_splitting_hz,
            "gyromagnetic_ratio_hz_per_t": self.gyromagnetic_ratio_hz_per_t,
            "linewidth_hz": self.linewidth_hz,
            "pl_rate_bright_hz": self.pl_rate_bright_hz,
            "rabi_rate_hz": self.rabi_rate_hz,
            "t1_s": self.t1_s,
            "t2_s": self.t2_s,
            "t2_star_s": self.t2_star_s,
            "readout_settle_ns": self.readout_settle_ns,
        }
        for name, value in positive.items():
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                raise PhysicsError(f"{name} must be a positive finite number, got {value!r}")
        if not math.isfinite(self.bias_field_t):
            raise PhysicsError("bias_field_t must be finite")
        if not 0 < self.contrast <= 1:
            raise PhysicsError(f"contrast must be in (0, 1], got {self.contrast!r}")
        if self.stretch_t2 < 1:
            raise PhysicsError(f"stretch_t2 must be >= 1, got {self.stretch_t2!r}")
        if not self.t2_star_s <= self.t2_s <= 2 * self.t1_s:
            raise PhysicsError(
                "coherence times must satisfy t2_star <= t2 <= 2*t1, got "
                f"t2_star={self.t2_star_s}, t2={self.t2_s}, t1={self.t1_s}"
            )

    @property
    def zeeman_shift_hz(self) -> float:
        return self.gyromagnetic_ratio_hz_per_t * self.bias_field_t

    @property
    def f_minus_hz(self) -> float:
        return self.zero_field_splitting_hz - self.zeeman_shift_hz

    @property
    def f_plus_hz(self) -> float:
        return self.zero_field_splitting_hz + self.zeeman_shift_hz

    def detuning_hz(self, drive_freq_hz: float) -> float:
        """Drive offset from the nearer of the two spin transitions."""
        d_minus = drive_freq_hz - self.f_minus_hz
        d_plus = drive_freq_hz - self.f_plus_hz
        return d_minus if abs(d_minus) <= abs(d_plus) else d_plus

    def with_overrides(self, **changes) -> "NvEnsembleParams":
        return replace(self, **changes)


def params_to_text(params: NvEnsembleParams) -> str:
    """Key-value text form, one field per line, same grammar as config
    files. Fields in seconds are written bare so the round trip is
    float-exact."""
    lines = []
    for f in fields(NvEnsembleParams):
        value = getattr(params, f.name)
        if f.name.endswith("_hz") or f.name.endswith("_hz_per_t"):
            lines.append(f"{f.name} = {value!r} Hz")
        elif f.name.endswith("_ns"):
            lines.append(f"{f.name} = {value!r} ns")
        else:
            lines.append(f"{f.name} = {value!r}")
    return "\n".join(lines) + "\n"


def params_from_text(text: str) -> NvEnsembleParams:
    """Parse the key-value form; unknown keys are rejected, missing
    keys keep their defaults. Unit suffixes are allowed and converted
    to the field's unit (so ``t1_s = 5 ms`` works)."""
    known = {f.name for f in fields(NvEnsembleParams)}
    overrides = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise PhysicsError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, val_text = (part.strip() for part in line.split("=", 1))
        if key not in known:
            raise PhysicsError(f"line {lineno}: unknown parameter {key!r}")
        value = parse_value(val_text)
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise PhysicsError(f"line {lineno}: {key} expects a number, got {value!r}")
        if val_text and val_text[-1].isalpha():
            # a unit suffix was present; parse_value canonicalized to ns/Hz
            if key.endswith("_s"):
                value = value * 1e-9
            elif not (key.endswith("_ns") or key.endswith("_hz") or key.endswith("_hz_per_t")):
                raise PhysicsError(f"line {lineno}: {key} takes no unit suffix")
        overrides[key] = float(value)
    return NvEnsembleParams(**overrides)


def lorentzian(f_hz: float, center_hz: float, fwhm_hz: float) -> float:
    """Unit-peak Lorentzian line of the given full width at half max."""
    x = 2.0 * (f_hz - center_hz) / fwhm_hz
    return 1.0 / (1.0 + x * x)


def odmr_pl_rate(drive_freq_hz: float, params: NvEnsembleParams) -> float:
    """Steady-state PL rate under simultaneous laser and microwave drive."""
    if not (math.isfinite(drive_freq_hz) and drive_freq_hz > 0):
        raise PhysicsError(f"drive frequency must be positive, got {drive_freq_hz!r}")
    w = params.linewidth_hz
    dips = lorentzian(drive_freq_hz, params.f_minus_hz, w) + lorentzian(
        drive_freq_hz, params.f_plus_hz, w
    )
    return params.pl_rate_bright_hz * (1.0 - params.contrast * dips)


def rabi_p0(pulse_ns: float, rabi_rate_hz: float, detuning_hz: float = 0.0) -> float:
    """ms=0 population after a single drive pulse, starting from p0=1."""
    if pulse_ns < 0:
        raise PhysicsError(f"pulse length must be >= 0, got {pulse_ns!r}")
    omega_eff = math.hypot(rabi_rate_hz, detuning_hz)
    if omega_eff == 0.0:
        return 1.0
    s = math.sin(math.pi * omega_eff * pulse_ns * 1e-9)
    return 1.0 - (rabi_rate_hz / omega_eff) ** 2 * s * s


def ramsey_p0(tau_ns: float, detuning_hz: float, params: NvEnsembleParams) -> float:
    """Population after pi/2 - free evolution tau - pi/2, from p0=1."""
    if tau_ns < 0:
        raise PhysicsError(f"tau must be >= 0, got {tau_ns!r}")
    tau_s = tau_ns * 1e-9
    envelope = math.exp(-((tau_s / params.t2_star_s) ** 2))
    return 0.5 * (1.0 + math.cos(2.0 * math.pi * detuning_hz * tau_s) * envelope)


def hahn_p0(tau_ns: float, params: NvEnsembleParams) -> float:
    """Population after pi/2 - tau - pi - tau - pi/2 (total evolution 2*tau)."""
    if tau_ns < 0:
        raise PhysicsError(f"tau must be >= 0, got {tau_ns!r}")
    if tau_ns == 0:
        return 1.0
    x = (2.0 * tau_ns * 1e-9 / params.t2_s) ** params.stretch_t2
    return 0.5 * (1.0 + math.exp(-x))


def t1_p0(tau_ns: float, initial_p0: float, params: NvEnsembleParams) -> float:
    """Relaxation in the dark toward the 1/3 thermal mixture."""
    if tau_ns < 0:
        raise PhysicsError(f"tau must be >= 0, got {tau_ns!r}")
    if not 0 <= initial_p0 <= 1:
        raise PhysicsError(f"initial_p0 must be in [0, 1], got {initial_p0!r}")
    decay = math.exp(-tau_ns * 1e-9 / params.t1_s)
    return P0_EQUILIBRIUM + (initial_p0 - P0_EQUILIBRIUM) * decay


def readout_rate(p0: float, t_since_laser_on_ns: float, params: NvEnsembleParams) -> float:
    """Instantaneous PL rate at time t into a readout laser pulse.

    p0 is the population when the laser switched on; the spin contrast
    decays with the optical repolarization time constant.
    """
    if t_since_laser_on_ns < 0:
        raise PhysicsError(f"t must be >= 0, got {t_since_laser_on_ns!r}")
    if not 0 <= p0 <= 1:
        raise PhysicsError(f"p0 must be in [0, 1], got {p0!r}")
    transient = (1.0 - p0) * math.exp(-t_since_laser_on_ns / params.readout_settle_ns)
    return params.pl_rate_bright_hz * (1.0 - params.contrast * transient)


def repolarized_p0(p0: float, laser_on_ns: float, params: NvEnsembleParams) -> float:
    """Population after the laser has been on for the given time."""
    if laser_on_ns < 0:
        raise PhysicsError(f"laser time must be >= 0, got {laser_on_ns!r}")
    return 1.0 - (1.0 - p0) * math.exp(-laser_on_ns / params.readout_settle_ns)


def expected_window_photons(
    p0_at_laser_on: float,
    window_start_ns: float,
    window_end_ns: float,
    params: NvEnsembleParams,
) -> float:
    """Integral of readout_rate over [start, end) within one laser pulse,
    both measured from laser turn-on; returns expected photons (not a
    rate) before detector efficiency."""
    if window_end_ns < window_start_ns:
        raise PhysicsError("window end precedes start")
    settle = params.readout_settle_ns
    span_ns = window_end_ns - window_start_ns
    # integral of exp(-t/settle) over the window, in ns
    tail = settle * (
        math.exp(-window_start_ns / settle) - math.exp(-window_end_ns / settle)
    )
    integral_ns = span_ns - params.contrast * (1.0 - p0_at_laser_on) * tail
    return params.pl_rate_bright_hz * integral_ns * 1e-9
