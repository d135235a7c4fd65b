"""Measurement schemas, program builders, and the run pipeline."""

import statistics

import numpy as np
import pytest

from nvlab.channels import CH_LASER, CH_MICROWAVE, CH_TRIGGER
from nvlab.compiler import compile as compile_stream
from nvlab.config import COMMON_OPTIONAL_KEYS, ExperimentConfig, validate_config
from nvlab.errors import ConfigError
from nvlab.kinds import MeasurementKind
from nvlab.measurements import (
    REFERENCE_TAG,
    SCHEMAS,
    SIGNAL_TAG,
    build_program,
    run_measurement,
    schema_for,
)
from nvlab.program import MicrowavePulse, TriggerWindow, check_timing

from conftest import demo_config
from oracles import expand_program_naive

REQUIRED = {
    MeasurementKind.PL_INTENSITY: {"laser_time", "readout_time"},
    MeasurementKind.ODMR: {"freq_start", "freq_stop", "n_points"},
    MeasurementKind.READOUT_WINDOW: {"mw_freq", "pi_time", "readout_laser_time"},
    MeasurementKind.RABI: {"mw_freq", "mw_time_start", "mw_time_stop", "n_points"},
    MeasurementKind.RAMSEY: {"mw_freq", "pi_time", "tau_start", "tau_stop", "n_points"},
    MeasurementKind.HAHN_ECHO: {"mw_freq", "pi_time", "tau_start", "tau_stop", "n_points"},
    MeasurementKind.T1: {"tau_start", "tau_stop", "n_points"},
}


def window_tags(program):
    return [ev.payload.tag for ev in program.events
            if isinstance(ev.payload, TriggerWindow)]


class TestSchemas:
    def test_every_kind_has_a_schema(self):
        assert set(SCHEMAS) == set(MeasurementKind)
        for kind in MeasurementKind:
            assert schema_for(kind) is SCHEMAS[kind]

    def test_required_keys(self, each_kind):
        schema = schema_for(each_kind)
        required = {spec.name for spec in schema.keys if spec.required}
        assert required == REQUIRED[each_kind]

    def test_demo_configs_validate_cleanly(self, each_kind):
        report = validate_config(demo_config(each_kind), schema_for(each_kind))
        assert report.ok
        assert not report.warnings

    def test_demo_configs_use_only_schema_keys(self, each_kind):
        known = {spec.name for spec in schema_for(each_kind).keys}
        known |= set(COMMON_OPTIONAL_KEYS)
        assert set(demo_config(each_kind).entries) <= known


class TestBuilders:
    def test_demo_programs_are_timing_legal(self, each_kind):
        program = build_program(each_kind, demo_config(each_kind))
        assert check_timing(program) == []

    def test_demo_programs_compile(self, each_kind):
        program = build_program(each_kind, demo_config(each_kind))
        stream = compile_stream(program)
        assert stream.meta.n_sweep_points == program.n_sweep_points
        assert stream.meta.total_cycles > 0

    def test_pl_has_no_microwave_events(self):
        program = build_program(MeasurementKind.PL_INTENSITY,
                                demo_config(MeasurementKind.PL_INTENSITY))
        assert all(ev.channel != CH_MICROWAVE for ev in program.events)
        assert window_tags(program) == [SIGNAL_TAG]

    def test_pl_zero_gain_drops_the_laser(self):
        cfg = demo_config(MeasurementKind.PL_INTENSITY).with_entries(laser_gain=0.0)
        program = build_program(MeasurementKind.PL_INTENSITY, cfg)
        assert all(ev.channel != CH_LASER for ev in program.events)

    def test_odmr_drive_covers_the_laser(self):
        program = build_program(MeasurementKind.ODMR, demo_config(MeasurementKind.ODMR))
        lasers = [ev for ev in program.events if ev.channel == CH_LASER]
        drives = [ev for ev in program.events if ev.channel == CH_MICROWAVE]
        assert len(lasers) == 1 and len(drives) == 1
        assert drives[0].start == lasers[0].start
        assert drives[0].length == lasers[0].length
        # the register carries the frequency itself
        assert drives[0].payload.frequency_hz.scale == 1.0

    def test_odmr_sweep_matches_the_config_grid(self):
        cfg = demo_config(MeasurementKind.ODMR)
        program = build_program(MeasurementKind.ODMR, cfg)
        regs = program.register_values()
        f0 = cfg.number("freq_start")
        step = (cfg.number("freq_stop") - f0) / (cfg.integer("n_points") - 1)
        assert regs == tuple(f0 + i * step for i in range(cfg.integer("n_points")))
        assert regs[-1] == pytest.approx(cfg.number("freq_stop"), rel=1e-12)

    def test_rabi_sweeps_only_the_drive_length(self):
        cfg = demo_config(MeasurementKind.RABI).with_entries(n_points=5, inner_reps=1)
        program = build_program(MeasurementKind.RABI, cfg)
        step = program.sweep.step
        by_point = {}
        for ev in expand_program_naive(program):
            by_point.setdefault(ev.sweep_index, []).append(ev)
        for i in range(1, 5):
            prev = by_point[i - 1]
            here = by_point[i]
            for a, b in zip(prev, here):
                assert a.channel == b.channel
                if isinstance(b.payload, MicrowavePulse):
                    assert b.length - a.length == step
                    assert b.payload == a.payload  # frequency and gain fixed
                else:
                    assert b.length == a.length

    def test_reference_window_only_on_pulsed_sweeps(self, each_kind):
        program = build_program(each_kind, demo_config(each_kind))
        pulsed = {MeasurementKind.RABI, MeasurementKind.RAMSEY,
                  MeasurementKind.HAHN_ECHO, MeasurementKind.T1}
        tags = window_tags(program)
        assert (REFERENCE_TAG in tags) == (each_kind in pulsed)

    def test_hahn_shot_is_three_pulses_with_equal_gaps(self):
        cfg = demo_config(MeasurementKind.HAHN_ECHO).with_entries(
            n_points=4, inner_reps=2)
        program = build_program(MeasurementKind.HAHN_ECHO, cfg)
        expanded = expand_program_naive(program)
        mw = [ev for ev in expanded if isinstance(ev.payload, MicrowavePulse)]
        assert len(mw) == 3 * 4 * 2
        regs = program.register_values()
        for i in range(4):
            for rep in range(2):
                shot = sorted(
                    (ev for ev in mw if ev.sweep_index == i and ev.rep_index == rep),
                    key=lambda ev: ev.start,
                )
                gap1 = shot[1].start - (shot[0].start + shot[0].length)
                gap2 = shot[2].start - (shot[1].start + shot[1].length)
                assert gap1 == gap2 == int(regs[i])

    def test_t1_log_spacing_grid(self):
        program = build_program(MeasurementKind.T1, demo_config(MeasurementKind.T1))
        values = program.sweep.values
        assert values == tuple(sorted(set(values)))
        assert len(values) <= 30
        assert values[0] == 40000.0  # 100 us at 400 MHz
        assert values[-1] == 6000000.0  # 15 ms

    def test_t1_linear_spacing_grid(self):
        cfg = demo_config(MeasurementKind.T1).with_entries(log_spacing=False)
        program = build_program(MeasurementKind.T1, cfg)
        assert program.sweep.values is None
        assert program.sweep.n_points == 30

    def test_t1_pi_pulse_needs_drive_keys(self):
        cfg = demo_config(MeasurementKind.T1).with_entries(pi_pulse=True)
        with pytest.raises(ConfigError) as err:
            build_program(MeasurementKind.T1, cfg)
        assert set(err.value.report.missing_keys) == {"mw_freq", "pi_time"}

    def test_t1_pi_pulse_adds_one_drive_pulse(self):
        cfg = demo_config(MeasurementKind.T1).with_entries(
            pi_pulse=True, mw_freq=2.82e9, pi_time=100.0,
            mw_band_low=2e9, mw_band_high=4e9)
        program = build_program(MeasurementKind.T1, cfg)
        assert sum(1 for ev in program.events if ev.channel == CH_MICROWAVE) == 1

    def test_readout_window_slices_tile_the_laser(self):
        program = build_program(MeasurementKind.READOUT_WINDOW,
                                demo_config(MeasurementKind.READOUT_WINDOW))
        assert program.sweep.values == (1.0, 0.0)  # pi shot, then bright shot
        slices = sorted(
            (ev for ev in program.events if ev.channel == CH_TRIGGER),
            key=lambda ev: ev.start.base,
        )
        widths = {ev.length.base for ev in slices}
        assert len(widths) == 1
        width = widths.pop()
        for a, b in zip(slices, slices[1:]):
            assert b.start.base - a.start.base == width

    def test_missing_required_key_is_a_config_error(self):
        entries = dict(demo_config(MeasurementKind.ODMR).entries)
        entries.pop("n_points")
        broken = ExperimentConfig(entries, MeasurementKind.ODMR)
        with pytest.raises(ConfigError) as err:
            build_program(MeasurementKind.ODMR, broken)
        assert "n_points" in err.value.report.missing_keys

    def test_out_of_band_frequency_is_a_config_error(self):
        cfg = demo_config(MeasurementKind.RABI).with_entries(mw_freq=12e9)
        with pytest.raises(ConfigError):
            build_program(MeasurementKind.RABI, cfg)


class TestRunPipeline:
    def test_seed_determinism(self, bench_params):
        cfg = demo_config(MeasurementKind.PL_INTENSITY).with_entries(inner_reps=20)
        a = run_measurement(MeasurementKind.PL_INTENSITY, cfg, bench_params, seed=5)
        b = run_measurement(MeasurementKind.PL_INTENSITY, cfg, bench_params, seed=5)
        c = run_measurement(MeasurementKind.PL_INTENSITY, cfg, bench_params, seed=6)
        assert a.signal == b.signal
        assert a.records == b.records
        assert a.signal != c.signal

    def test_pl_dark_floor_with_laser_off(self, bench_params):
        cfg = demo_config(MeasurementKind.PL_INTENSITY).with_entries(
            laser_time=10000.0, readout_time=10000.0, laser_gain=0.0, inner_reps=400)
        result = run_measurement(
            MeasurementKind.PL_INTENSITY, cfg, bench_params,
            seed=11, dark_rate_hz=1e6, keep_records=False,
        )
        lam = 1e6 * 10000e-9  # 10 expected dark counts per shot
        level = result.signal[0]
        assert abs(level - lam) < 5 * (lam / 400) ** 0.5
        assert result.derived["pl_rate_hz"] == pytest.approx(1e6, rel=0.1)

    def test_pl_bright_level_tracks_the_rate(self, bench_params):
        cfg = demo_config(MeasurementKind.PL_INTENSITY).with_entries(
            laser_time=10000.0, readout_time=10000.0, inner_reps=100)
        result = run_measurement(
            MeasurementKind.PL_INTENSITY, cfg, bench_params,
            seed=12, dark_rate_hz=0.0, keep_records=False,
        )
        assert result.derived["pl_rate_hz"] == pytest.approx(
            bench_params.pl_rate_bright_hz, rel=0.02)

    def test_vanishing_contrast_equalizes_signal_and_reference(self, bench_params):
        # The optically detected signal rides entirely on the contrast;
        # at 1e-9 the signal and bright-reference traces must agree to
        # within shot noise.
        params = bench_params.with_overrides(contrast=1e-9)
        cfg = demo_config(MeasurementKind.RABI).with_entries(
            n_points=12, mw_time_stop=400.0, inner_reps=2000)
        result = run_measurement(
            MeasurementKind.RABI, cfg, params, seed=13,
            dark_rate_hz=0.0, keep_records=False,
        )
        lam = bench_params.pl_rate_bright_hz * 1000e-9  # 1 us windows
        sigma = (2 * lam / 2000) ** 0.5
        worst = max(abs(s - r) for s, r in zip(result.signal, result.reference))
        assert worst < 5 * sigma

    def test_more_reps_tighten_the_point_spread(self, bench_params):
        cfg = demo_config(MeasurementKind.PL_INTENSITY).with_entries(
            laser_time=10000.0, readout_time=10000.0)
        levels = {}
        for reps in (100, 400):
            cfg_r = cfg.with_entries(inner_reps=reps)
            levels[reps] = [
                run_measurement(
                    MeasurementKind.PL_INTENSITY, cfg_r, bench_params,
                    seed=seed, dark_rate_hz=0.0, keep_records=False,
                ).signal[0]
                for seed in range(60)
            ]
        ratio = statistics.stdev(levels[100]) / statistics.stdev(levels[400])
        assert 1.5 < ratio < 2.6  # 4x averaging should halve the spread

    def test_signal_trace_is_the_mean_over_records(self, bench_params):
        cfg = demo_config(MeasurementKind.RABI).with_entries(
            n_points=6, inner_reps=8)
        result = run_measurement(MeasurementKind.RABI, cfg, bench_params, seed=14)
        for i in range(6):
            for tag, trace in ((SIGNAL_TAG, result.signal),
                               (REFERENCE_TAG, result.reference)):
                counts = [rec.photon_count for rec in result.records
                          if rec.sweep_index == i and rec.window_tag == tag]
                assert len(counts) == 8
                assert trace[i] == sum(counts) / 8

    def test_odmr_run_finds_the_splitting(self, bench_params):
        cfg = demo_config(MeasurementKind.ODMR).with_entries(
            n_points=41, inner_reps=10)
        result = run_measurement(
            MeasurementKind.ODMR, cfg, bench_params, seed=15, keep_records=False)
        assert result.axis.name == "mw_freq" and result.axis.unit == "Hz"
        assert result.fit is not None and result.fit.converged
        assert result.derived["splitting_hz"] == pytest.approx(1e8, abs=3e6)
        assert result.derived["f_minus_hz"] == pytest.approx(2.82e9, abs=2e6)
        assert result.derived["f_plus_hz"] == pytest.approx(2.92e9, abs=2e6)

    def test_rabi_run_recovers_the_pi_time(self, bench_params):
        cfg = demo_config(MeasurementKind.RABI).with_entries(
            n_points=40, mw_time_stop=400.0, inner_reps=100)
        result = run_measurement(
            MeasurementKind.RABI, cfg, bench_params, seed=16, keep_records=False)
        assert result.axis.name == "mw_time" and result.axis.unit == "ns"
        period_ns = 2.5
        assert result.axis.values == tuple(
            float(r) * period_ns for r in
            build_program(MeasurementKind.RABI, cfg).register_values()
        )
        assert result.fit is not None and result.fit.converged
        assert result.derived["pi_time_ns"] == pytest.approx(100.0, rel=0.05)
        assert result.derived["rabi_freq_hz"] == pytest.approx(5e6, rel=0.05)

    def test_t1_run_reports_a_relaxation_time(self, bench_params):
        cfg = demo_config(MeasurementKind.T1).with_entries(
            n_points=12, inner_reps=200)
        result = run_measurement(
            MeasurementKind.T1, cfg, bench_params, seed=17, keep_records=False)
        assert result.fit is not None
        assert result.derived["t1_ns"] > 0
        assert result.reference is not None

    def test_readout_window_run_places_the_gate(self, bench_params):
        cfg = demo_config(MeasurementKind.READOUT_WINDOW).with_entries(inner_reps=50)
        result = run_measurement(
            MeasurementKind.READOUT_WINDOW, cfg, bench_params,
            seed=18, keep_records=False)
        assert result.axis.name == "window_start"
        assert len(result.signal) == len(result.axis.values)
        assert result.derived["best_window_length_slices"] >= 1
        assert result.derived["best_window_start_ns"] in result.axis.values
        # early gate: the spin signal decays away within the settle time
        assert result.derived["best_window_start_ns"] <= 1000.0

    def test_run_rejects_invalid_config(self, bench_params):
        cfg = demo_config(MeasurementKind.RABI).with_entries(mw_gain=1.5)
        with pytest.raises(ConfigError):
            run_measurement(MeasurementKind.RABI, cfg, bench_params, seed=1)

    def test_binned_run_matches_record_run(self, bench_params):
        cfg = demo_config(MeasurementKind.RABI).with_entries(
            n_points=5, inner_reps=10)
        full = run_measurement(MeasurementKind.RABI, cfg, bench_params, seed=19)
        slim = run_measurement(MeasurementKind.RABI, cfg, bench_params, seed=19,
                               keep_records=False)
        assert slim.records == ()
        assert slim.signal == full.signal
        assert slim.reference == full.reference
