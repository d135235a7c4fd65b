"""The seven standardized measurements.

Each kind supplies a required-key schema, a pulse-program builder, and
a default analysis; ``run_measurement`` chains them: validate config,
build the program, compile and execute it, aggregate window counts per
sweep point, fit. Builders quantize all times to generator cycles and
put the swept quantity in the sweep register (cycles for durations, Hz
for frequencies, raw value for gains) so compiled operands stay exact.
"""

from __future__ import annotations

import math

import numpy as np

from .channels import CH_LASER, CH_MICROWAVE, CH_TRIGGER
from .clocks import ClockSpec, ns_to_cycles
from .compiler import compile  # noqa: A004  (domain verb)
from .config import (
    ConfigSchema,
    ExperimentConfig,
    KeySpec,
    ValidationReport,
    validate_config,
)
from .errors import ConfigError, DimensionError
from .fitting import FitResult, fit_decay, fit_odmr, fit_rabi
from .instrument import (
    DEFAULT_DARK_RATE_HZ,
    MODE_ANALOG,
    MODE_PHOTON,
    execute,
    execute_binned,
)
from .kinds import MeasurementKind
from .physics import NvEnsembleParams
from .program import Affine, LaserPulse, PulseEvent, PulseProgram, Sweep, TriggerWindow, microwave
from .readout import optimize_readout_window
from .results import MeasurementResult, SweepAxis

SIGNAL_TAG = "signal"
REFERENCE_TAG = "ref"


def _key(name, kind, required=True, default=None, help=""):
    return KeySpec(name=name, kind=kind, required=required, default=default, help=help)


_COMMON_TAIL = (
    _key("inner_reps", "count", required=False, default=100,
         help="repetitions averaged per sweep point"),
)

_READOUT_KEYS = (
    _key("readout_laser_time", "duration", required=False, default=1500.0,
         help="readout laser pulse length"),
    _key("readout_time", "duration", required=False, default=1000.0,
         help="signal window length"),
    _key("readout_delay", "signed_duration", required=False, default=0.0,
         help="signal window start relative to the readout laser"),
)

SCHEMAS: dict[MeasurementKind, ConfigSchema] = {
    MeasurementKind.PL_INTENSITY: ConfigSchema(
        MeasurementKind.PL_INTENSITY,
        (
            _key("laser_time", "duration", help="laser-on span"),
            _key("readout_time", "duration", help="counting window length"),
            _key("readout_delay", "signed_duration", required=False, default=0.0),
            _key("laser_gain", "gain", required=False, default=1.0,
                 help="0 turns the laser off (dark-count floor)"),
        ) + _COMMON_TAIL,
    ),
    MeasurementKind.ODMR: ConfigSchema(
        MeasurementKind.ODMR,
        (
            _key("freq_start", "frequency"),
            _key("freq_stop", "frequency"),
            _key("n_points", "count"),
            _key("mw_gain", "gain", required=False, default=1.0),
            _key("laser_time", "duration", required=False, default=20000.0,
                 help="continuous laser span per point"),
            _key("readout_time", "duration", required=False, default=20000.0),
        ) + _COMMON_TAIL,
    ),
    MeasurementKind.READOUT_WINDOW: ConfigSchema(
        MeasurementKind.READOUT_WINDOW,
        (
            _key("mw_freq", "frequency"),
            _key("pi_time", "duration"),
            _key("readout_laser_time", "duration"),
            _key("mw_gain", "gain", required=False, default=1.0),
            _key("laser_init_time", "duration", required=False, default=3000.0),
            _key("wait_time", "duration", required=False, default=200.0),
            _key("slice_time", "duration", required=False, default=64.0,
                 help="width of each contiguous readout slice"),
        ) + _COMMON_TAIL,
    ),
    MeasurementKind.RABI: ConfigSchema(
        MeasurementKind.RABI,
        (
            _key("mw_freq", "frequency"),
            _key("mw_time_start", "duration"),
            _key("mw_time_stop", "duration"),
            _key("n_points", "count"),
            _key("mw_gain", "gain", required=False, default=1.0),
            _key("laser_init_time", "duration", required=False, default=3000.0),
            _key("mw_wait", "duration", required=False, default=200.0),
        ) + _READOUT_KEYS + _COMMON_TAIL,
    ),
    MeasurementKind.RAMSEY: ConfigSchema(
        MeasurementKind.RAMSEY,
        (
            _key("mw_freq", "frequency"),
            _key("pi_time", "duration"),
            _key("tau_start", "duration"),
            _key("tau_stop", "duration"),
            _key("n_points", "count"),
            _key("mw_gain", "gain", required=False, default=1.0),
            _key("laser_init_time", "duration", required=False, default=3000.0),
            _key("mw_wait", "duration", required=False, default=200.0),
        ) + _READOUT_KEYS + _COMMON_TAIL,
    ),
    MeasurementKind.HAHN_ECHO: ConfigSchema(
        MeasurementKind.HAHN_ECHO,
        (
            _key("mw_freq", "frequency"),
            _key("pi_time", "duration"),
            _key("tau_start", "duration"),
            _key("tau_stop", "duration"),
            _key("n_points", "count"),
            _key("mw_gain", "gain", required=False, default=1.0),
            _key("laser_init_time", "duration", required=False, default=3000.0),
            _key("mw_wait", "duration", required=False, default=200.0),
            _key("stretched", "flag", required=False, default=False,
                 help="fit a stretched exponential"),
        ) + _READOUT_KEYS + _COMMON_TAIL,
    ),
    MeasurementKind.T1: ConfigSchema(
        MeasurementKind.T1,
        (
            _key("tau_start", "duration"),
            _key("tau_stop", "duration"),
            _key("n_points", "count"),
            _key("pi_pulse", "flag", required=False, default=False,
                 help="invert the spin before the dark delay"),
            _key("log_spacing", "flag", required=False, default=False),
            _key("mw_freq", "frequency", required=False),
            _key("pi_time", "duration", required=False),
            _key("mw_gain", "gain", required=False, default=1.0),
            _key("laser_init_time", "duration", required=False, default=3000.0),
            _key("mw_wait", "duration", required=False, default=200.0),
        ) + _READOUT_KEYS + _COMMON_TAIL,
    ),
}


def schema_for(kind: MeasurementKind) -> ConfigSchema:
    return SCHEMAS[kind]


def _apply_defaults(config: ExperimentConfig, schema: ConfigSchema) -> ExperimentConfig:
    fill = {
        spec.name: spec.default
        for spec in schema.keys
        if spec.default is not None and spec.name not in config
    }
    return config.with_entries(**fill) if fill else config


def _signed_cycles(ns: float, clock: ClockSpec) -> int:
    mag = ns_to_cycles(abs(ns), clock.generator_clock_hz)
    return mag if ns >= 0 else -mag


def _require(config: ExperimentConfig, keys) -> None:
    missing = [k for k in keys if k not in config]
    if missing:
        raise ConfigError(ValidationReport(missing_keys=tuple(missing)))


# ---------------------------------------------------------------------------
# Builders

def _build_pl(cfg: ExperimentConfig, clock: ClockSpec) -> PulseProgram:
    laser = clock.to_cycles(cfg.number("laser_time"))
    window = clock.to_cycles(cfg.number("readout_time"))
    delay = _signed_cycles(cfg.number("readout_delay"), clock)
    events = []
    if laser > 0 and cfg.number("laser_gain") > 0:
        events.append(PulseEvent(CH_LASER, 0, laser, LaserPulse(), label="laser_time"))
    if window > 0:
        events.append(PulseEvent(
            CH_TRIGGER, delay, window, TriggerWindow(SIGNAL_TAG), label="readout_time"
        ))
    return PulseProgram(
        tuple(events), inner_reps=cfg.integer("inner_reps"),
        clock=clock, channels=cfg.channels,
    )


def _build_odmr(cfg: ExperimentConfig, clock: ClockSpec) -> PulseProgram:
    f0 = cfg.number("freq_start")
    f1 = cfg.number("freq_stop")
    n = cfg.integer("n_points")
    laser = clock.to_cycles(cfg.number("laser_time"))
    window = clock.to_cycles(cfg.number("readout_time"))
    events = []
    if laser > 0:
        # laser and drive stay on together: steady-state spectroscopy
        events.append(PulseEvent(CH_LASER, 0, laser, LaserPulse(), label="laser_time"))
        events.append(PulseEvent(
            CH_MICROWAVE, 0, laser,
            microwave(Affine(0.0, 1.0), cfg.number("mw_gain")),
            label="mw_freq",
        ))
    if window > 0:
        events.append(PulseEvent(
            CH_TRIGGER, 0, window, TriggerWindow(SIGNAL_TAG), label="readout_time"
        ))
    step = (f1 - f0) / (n - 1) if n > 1 else 0.0
    return PulseProgram(
        tuple(events),
        sweep=Sweep("mw_freq", n, start=f0, step=step),
        inner_reps=cfg.integer("inner_reps"),
        clock=clock, channels=cfg.channels,
    )


def _build_readout_window(cfg: ExperimentConfig, clock: ClockSpec) -> PulseProgram:
    init = max(1, clock.to_cycles(cfg.number("laser_init_time")))
    wait = clock.to_cycles(cfg.number("wait_time"))
    pi_c = max(1, clock.to_cycles(cfg.number("pi_time")))
    readout = max(1, clock.to_cycles(cfg.number("readout_laser_time")))
    slice_c = max(1, clock.to_cycles(cfg.number("slice_time")))
    n_slices = max(1, readout // slice_c)

    t_pi = init + wait
    t_r = t_pi + pi_c + wait
    events = [
        PulseEvent(CH_LASER, 0, init, LaserPulse(), label="laser_init_time"),
        PulseEvent(
            CH_MICROWAVE, t_pi, pi_c,
            microwave(cfg.number("mw_freq"), Affine(0.0, 1.0)),
            label="pi_time",
        ),
        PulseEvent(CH_LASER, t_r, readout, LaserPulse(), label="readout_laser_time"),
    ]
    for k in range(n_slices):
        events.append(PulseEvent(
            CH_TRIGGER, t_r + k * slice_c, slice_c,
            TriggerWindow(f"w{k:03d}"),
            label="slice_time" if k == 0 else None,
        ))
    # two frames per repetition block: pi shot, then a no-drive bright shot
    return PulseProgram(
        tuple(events),
        sweep=Sweep("mw_gain", 2, values=(cfg.number("mw_gain"), 0.0)),
        inner_reps=cfg.integer("inner_reps"),
        clock=clock, channels=cfg.channels,
    )


def _duration_sweep_cycles(cfg: ExperimentConfig, clock: ClockSpec, start_key: str, stop_key: str):
    c0 = max(1, clock.to_cycles(cfg.number(start_key)))
    c1 = max(c0, clock.to_cycles(cfg.number(stop_key)))
    n = cfg.integer("n_points")
    step = max(1, round((c1 - c0) / (n - 1))) if n > 1 else 0
    return c0, step, n


def _reference_window(init: int, window: int) -> "PulseEvent | None":
    """Bright reference at the tail of the init laser; sized to fit."""
    length = min(window, init)
    if length < 1:
        return None
    return PulseEvent(
        CH_TRIGGER, init - length, length, TriggerWindow(REFERENCE_TAG),
        label="readout_time",
    )


def _build_rabi(cfg: ExperimentConfig, clock: ClockSpec) -> PulseProgram:
    init = clock.to_cycles(cfg.number("laser_init_time"))
    wait = clock.to_cycles(cfg.number("mw_wait"))
    readout = max(1, clock.to_cycles(cfg.number("readout_laser_time")))
    window = max(1, clock.to_cycles(cfg.number("readout_time")))
    delay = _signed_cycles(cfg.number("readout_delay"), clock)
    c0, step, n = _duration_sweep_cycles(cfg, clock, "mw_time_start", "mw_time_stop")

    t_mw = init + wait
    t_read = t_mw + wait  # plus the swept pulse length via the register
    events = [
        PulseEvent(
            CH_MICROWAVE, t_mw, Affine(0, 1),
            microwave(cfg.number("mw_freq"), cfg.number("mw_gain")),
            label="mw_time",
        ),
        PulseEvent(CH_LASER, Affine(t_read, 1), readout, LaserPulse(),
                   label="readout_laser_time"),
        PulseEvent(CH_TRIGGER, Affine(t_read + delay, 1), window,
                   TriggerWindow(SIGNAL_TAG), label="readout_time"),
    ]
    if init > 0:
        events.insert(0, PulseEvent(CH_LASER, 0, init, LaserPulse(), label="laser_init_time"))
        ref = _reference_window(init, window)
        if ref is not None:
            events.append(ref)
    return PulseProgram(
        tuple(events),
        sweep=Sweep("mw_time", n, start=float(c0), step=float(step)),
        inner_reps=cfg.integer("inner_reps"),
        clock=clock, channels=cfg.channels,
    )


def _build_ramsey(cfg: ExperimentConfig, clock: ClockSpec) -> PulseProgram:
    init = clock.to_cycles(cfg.number("laser_init_time"))
    wait = clock.to_cycles(cfg.number("mw_wait"))
    readout = max(1, clock.to_cycles(cfg.number("readout_laser_time")))
    window = max(1, clock.to_cycles(cfg.number("readout_time")))
    delay = _signed_cycles(cfg.number("readout_delay"), clock)
    half_pi = max(1, round(clock.to_cycles(cfg.number("pi_time")) / 2))
    c0, step, n = _duration_sweep_cycles(cfg, clock, "tau_start", "tau_stop")

    drive = microwave(cfg.number("mw_freq"), cfg.number("mw_gain"))
    t0 = init + wait
    t_read = t0 + 2 * half_pi + wait  # plus tau via the register
    events = [
        PulseEvent(CH_MICROWAVE, t0, half_pi, drive, label="pi_time/2"),
        PulseEvent(CH_MICROWAVE, Affine(t0 + half_pi, 1), half_pi, drive, label="pi_time/2"),
        PulseEvent(CH_LASER, Affine(t_read, 1), readout, LaserPulse(),
                   label="readout_laser_time"),
        PulseEvent(CH_TRIGGER, Affine(t_read + delay, 1), window,
                   TriggerWindow(SIGNAL_TAG), label="readout_time"),
    ]
    if init > 0:
        events.insert(0, PulseEvent(CH_LASER, 0, init, LaserPulse(), label="laser_init_time"))
        ref = _reference_window(init, window)
        if ref is not None:
            events.append(ref)
    return PulseProgram(
        tuple(events),
        sweep=Sweep("tau", n, start=float(c0), step=float(step)),
        inner_reps=cfg.integer("inner_reps"),
        clock=clock, channels=cfg.channels,
    )


def _build_hahn(cfg: ExperimentConfig, clock: ClockSpec) -> PulseProgram:
    init = clock.to_cycles(cfg.number("laser_init_time"))
    wait = clock.to_cycles(cfg.number("mw_wait"))
    readout = max(1, clock.to_cycles(cfg.number("readout_laser_time")))
    window = max(1, clock.to_cycles(cfg.number("readout_time")))
    delay = _signed_cycles(cfg.number("readout_delay"), clock)
    pi_c = max(1, clock.to_cycles(cfg.number("pi_time")))
    half_pi = max(1, round(pi_c / 2))
    c0, step, n = _duration_sweep_cycles(cfg, clock, "tau_start", "tau_stop")

    drive = microwave(cfg.number("mw_freq"), cfg.number("mw_gain"))
    t0 = init + wait
    # both free-evolution gaps are exactly the register value in cycles,
    # so the refocusing condition survives quantization
    t_read = t0 + 2 * half_pi + pi_c + wait  # plus 2*tau via the register
    events = [
        PulseEvent(CH_MICROWAVE, t0, half_pi, drive, label="pi_time/2"),
        PulseEvent(CH_MICROWAVE, Affine(t0 + half_pi, 1), pi_c, drive, label="pi_time"),
        PulseEvent(CH_MICROWAVE, Affine(t0 + half_pi + pi_c, 2), half_pi, drive,
                   label="pi_time/2"),
        PulseEvent(CH_LASER, Affine(t_read, 2), readout, LaserPulse(),
                   label="readout_laser_time"),
        PulseEvent(CH_TRIGGER, Affine(t_read + delay, 2), window,
                   TriggerWindow(SIGNAL_TAG), label="readout_time"),
    ]
    if init > 0:
        events.insert(0, PulseEvent(CH_LASER, 0, init, LaserPulse(), label="laser_init_time"))
        ref = _reference_window(init, window)
        if ref is not None:
            events.append(ref)
    return PulseProgram(
        tuple(events),
        sweep=Sweep("tau", n, start=float(c0), step=float(step)),
        inner_reps=cfg.integer("inner_reps"),
        clock=clock, channels=cfg.channels,
    )


def _build_t1(cfg: ExperimentConfig, clock: ClockSpec) -> PulseProgram:
    init = max(1, clock.to_cycles(cfg.number("laser_init_time")))
    wait = clock.to_cycles(cfg.number("mw_wait"))
    readout = max(1, clock.to_cycles(cfg.number("readout_laser_time")))
    window = max(1, clock.to_cycles(cfg.number("readout_time")))
    delay = _signed_cycles(cfg.number("readout_delay"), clock)
    c0 = max(1, clock.to_cycles(cfg.number("tau_start")))
    c1 = max(c0, clock.to_cycles(cfg.number("tau_stop")))
    n = cfg.integer("n_points")

    if cfg.flag("log_spacing") and n > 1:
        values = tuple(float(v) for v in np.unique(
            np.round(np.geomspace(c0, c1, n)).astype(int)
        ))
        sweep = Sweep("tau", len(values), values=values)
    else:
        step = max(1, round((c1 - c0) / (n - 1))) if n > 1 else 0
        sweep = Sweep("tau", n, start=float(c0), step=float(step))

    events = [PulseEvent(CH_LASER, 0, init, LaserPulse(), label="laser_init_time")]
    t_after = init
    if cfg.flag("pi_pulse"):
        _require(cfg, ("mw_freq", "pi_time"))
        pi_c = max(1, clock.to_cycles(cfg.number("pi_time")))
        events.append(PulseEvent(
            CH_MICROWAVE, init + wait, pi_c,
            microwave(cfg.number("mw_freq"), cfg.number("mw_gain")),
            label="pi_time",
        ))
        t_after = init + wait + pi_c
    events.append(PulseEvent(CH_LASER, Affine(t_after, 1), readout, LaserPulse(),
                             label="readout_laser_time"))
    events.append(PulseEvent(CH_TRIGGER, Affine(t_after + delay, 1), window,
                             TriggerWindow(SIGNAL_TAG), label="readout_time"))
    ref = _reference_window(init, window)
    if ref is not None:
        events.append(ref)
    return PulseProgram(
        tuple(events), sweep=sweep,
        inner_reps=cfg.integer("inner_reps"),
        clock=clock, channels=cfg.channels,
    )


_BUILDERS = {
    MeasurementKind.PL_INTENSITY: _build_pl,
    MeasurementKind.ODMR: _build_odmr,
    MeasurementKind.READOUT_WINDOW: _build_readout_window,
    MeasurementKind.RABI: _build_rabi,
    MeasurementKind.RAMSEY: _build_ramsey,
    MeasurementKind.HAHN_ECHO: _build_hahn,
    MeasurementKind.T1: _build_t1,
}


def build_program(kind: MeasurementKind, config: ExperimentConfig) -> PulseProgram:
    """Validate the config against the kind's schema and build its
    pulse program. Raises ConfigError with the failing report."""
    schema = schema_for(kind)
    report = validate_config(config, schema)
    if not report.ok:
        raise ConfigError(report)
    cfg = _apply_defaults(config, schema)
    return _BUILDERS[kind](cfg, ClockSpec())


# ---------------------------------------------------------------------------
# Run pipeline

def _bin_records(records) -> dict[tuple[int, str], tuple[float, int]]:
    bins: dict[tuple[int, str], tuple[float, int]] = {}
    for rec in records:
        if rec.mode == MODE_ANALOG:
            value = (
                sum(rec.analog_samples) / len(rec.analog_samples)
                if rec.analog_samples else 0.0
            )
        else:
            value = float(rec.photon_count)
        prev = bins.get((rec.sweep_index, rec.window_tag))
        if prev is None:
            bins[(rec.sweep_index, rec.window_tag)] = (value, 1)
        else:
            bins[(rec.sweep_index, rec.window_tag)] = (prev[0] + value, prev[1] + 1)
    return bins


def _mean(bins, sweep_index: int, tag: str) -> float:
    entry = bins.get((sweep_index, tag))
    if entry is None or entry[1] == 0:
        return 0.0
    return entry[0] / entry[1]


def _trace(bins, n_points: int, tag: str) -> tuple[float, ...]:
    return tuple(_mean(bins, i, tag) for i in range(n_points))


def run_measurement(
    kind: MeasurementKind,
    config: ExperimentConfig,
    params: NvEnsembleParams,
    seed: int,
    mode: str = MODE_PHOTON,
    efficiency: float = 1.0,
    dark_rate_hz: float = DEFAULT_DARK_RATE_HZ,
    analog_noise_sigma: float = 0.05,
    keep_records: bool = True,
) -> MeasurementResult:
    """Validate, build, compile, execute, aggregate, fit.

    ``keep_records=False`` skips materializing per-window records (the
    aggregates are drawn from the identical random stream), for callers
    that only need the per-point traces.
    """
    schema = schema_for(kind)
    report = validate_config(config, schema)
    if not report.ok:
        raise ConfigError(report)
    cfg = _apply_defaults(config, schema)
    program = _BUILDERS[kind](cfg, ClockSpec())
    stream = compile(program)

    sim = dict(
        mode=mode, efficiency=efficiency, dark_rate_hz=dark_rate_hz,
        analog_noise_sigma=analog_noise_sigma,
    )
    if keep_records:
        records = tuple(execute(stream, params, seed, **sim))
        bins = _bin_records(records)
    else:
        records = ()
        bins = execute_binned(stream, params, seed, **sim)

    result = _package(kind, cfg, program, bins, params, seed, mode)
    result.records = records
    return result


def _package(kind, cfg, program, bins, params, seed, mode) -> MeasurementResult:
    clock = program.clock
    period_ns = clock.to_ns(1)
    regs = program.register_values()
    n = len(regs)

    def base(axis, signal, reference=None):
        return MeasurementResult(
            kind=kind, axis=axis, signal=signal, reference=reference,
            records=(), config=cfg, params=params, seed=seed, mode=mode,
        )

    if kind is MeasurementKind.PL_INTENSITY:
        level = _mean(bins, 0, SIGNAL_TAG)
        result = base(SweepAxis("point", "index", (0.0,)), (level,))
        window_s = cfg.number("readout_time") * 1e-9
        if mode == MODE_PHOTON and window_s > 0:
            result.derived["pl_rate_hz"] = level / window_s
        return result

    if kind is MeasurementKind.ODMR:
        signal = _trace(bins, n, SIGNAL_TAG)
        result = base(SweepAxis("mw_freq", "Hz", tuple(float(r) for r in regs)), signal)
        result.fit = _try_fit(lambda: fit_odmr(result.axis.values, signal))
        if result.fit is not None:
            p = result.fit.params
            if "center1" in p:
                lo, hi = sorted((p["center1"], p["center2"]))
                result.derived["f_minus_hz"] = lo
                result.derived["f_plus_hz"] = hi
                result.derived["splitting_hz"] = hi - lo
            else:
                result.derived["center_hz"] = p["center"]
        return result

    if kind is MeasurementKind.READOUT_WINDOW:
        slice_c = max(1, clock.to_cycles(cfg.number("slice_time")))
        readout = max(1, clock.to_cycles(cfg.number("readout_laser_time")))
        n_slices = max(1, readout // slice_c)
        tags = [f"w{k:03d}" for k in range(n_slices)]
        starts = tuple(k * slice_c * period_ns for k in range(n_slices))
        pi_trace = tuple(_mean(bins, 0, t) for t in tags)
        bright_trace = tuple(_mean(bins, 1, t) for t in tags)
        result = base(SweepAxis("window_start", "ns", starts), pi_trace)
        best_start, best_len, _curve = optimize_readout_window(
            starts, bright_trace, pi_trace, window_counts=cfg.integer("inner_reps")
        )
        result.derived["best_window_start_ns"] = float(best_start)
        result.derived["best_window_length_slices"] = float(best_len)
        result.derived["best_window_length_ns"] = best_len * slice_c * period_ns
        return result

    axis = SweepAxis("tau", "ns", tuple(float(r) * period_ns for r in regs))
    signal = _trace(bins, n, SIGNAL_TAG)
    has_ref = any(tag == REFERENCE_TAG for _, tag in bins)
    reference = _trace(bins, n, REFERENCE_TAG) if has_ref else None

    if kind is MeasurementKind.RABI:
        axis = SweepAxis("mw_time", "ns", axis.values)
        result = base(axis, signal, reference)
        fitted = _try_fit(lambda: fit_rabi(axis.values, signal))
        if fitted is not None:
            result.fit, rabi_derived = fitted
            result.derived["pi_time_ns"] = rabi_derived["pi_time"]
            result.derived["pi_time_err_ns"] = rabi_derived["pi_time_err"]
            result.derived["rabi_freq_hz"] = result.fit.params["frequency"] * 1e9
        return result

    if kind is MeasurementKind.RAMSEY:
        result = base(axis, signal, reference)
        result.fit = _try_fit(lambda: _fit_ramsey(axis.values, signal))
        if result.fit is not None:
            result.derived["t2_star_ns"] = result.fit.params["decay"]
            result.derived["detuning_hz"] = abs(result.fit.params["frequency"]) * 1e9
        return result

    if kind is MeasurementKind.HAHN_ECHO:
        result = base(axis, signal, reference)
        evolution = tuple(2.0 * t for t in axis.values)  # both arms
        stretched = cfg.flag("stretched")
        result.fit = _try_fit(lambda: fit_decay(evolution, signal, stretched=stretched))
        if result.fit is not None:
            result.derived["t2_ns"] = result.fit.params["tau"]
        return result

    if kind is MeasurementKind.T1:
        result = base(axis, signal, reference)
        result.fit = _try_fit(lambda: fit_decay(axis.values, signal))
        if result.fit is not None:
            result.derived["t1_ns"] = result.fit.params["tau"]
        return result

    raise ValueError(f"unhandled measurement kind {kind}")


def _fit_ramsey(times_ns, signal) -> FitResult:
    from .fitting import DAMPED_COSINE, fit_least_squares

    x = np.asarray(times_ns, dtype=float)
    y = np.asarray(signal, dtype=float)
    if len(x) < 12:
        raise DimensionError("need at least 12 points for a fringe fit")
    span = float(x[-1] - x[0]) or 1.0
    spectrum = np.abs(np.fft.rfft(y - y.mean()))
    freqs = np.fft.rfftfreq(len(x), d=span / max(len(x) - 1, 1))
    f0 = float(freqs[1 + int(np.argmax(spectrum[1:]))]) if len(spectrum) > 1 else 1.0 / span
    guess = {
        "offset": float(y.mean()),
        "amplitude": float((y.max() - y.min()) / 2.0) or 1e-12,
        "frequency": max(f0, 0.25 / span),
        "phase": 0.0,
        "decay": span / 2.0,
    }
    dt = span / max(len(x) - 1, 1)
    return fit_least_squares(
        x, y, DAMPED_COSINE, guess,
        bounds={"frequency": (0.0, 2.0 / dt), "decay": (dt, None)},
    )


def _try_fit(thunk):
    """Analysis is best-effort: thin data yields a result without a fit."""
    try:
        return thunk()
    except DimensionError:
        return None
