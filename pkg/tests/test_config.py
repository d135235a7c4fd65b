"""Config grammar, schemas, and the validation report."""

import math

import pytest

from nvlab.config import (
    BandViolation,
    ExperimentConfig,
    format_value,
    parse_value,
    validate_config,
)
from nvlab.kinds import MeasurementKind
from nvlab.measurements import schema_for

from conftest import demo_config


class TestParseValue:
    @pytest.mark.parametrize(
        "text,expected",
        [
            ("100 ns", 100.0),
            ("1.5 us", 1500.0),
            ("2 ms", 2e6),
            ("0.005 s", 5e6),
            ("2.87 GHz", 2.87e9),
            ("50 MHz", 5e7),
            ("1 kHz", 1000.0),
            ("12 Hz", 12.0),
            ("true", True),
            ("False", False),
            ("42", 42),
            ("-3.5", -3.5),
            ("1e6", 1e6),
            ("linear", "linear"),
        ],
    )
    def test_examples(self, text, expected):
        value = parse_value(text)
        assert value == expected
        assert type(value) is type(expected)

    def test_unknown_unit_raises(self):
        with pytest.raises(ValueError):
            parse_value("5 parsec")

    @pytest.mark.parametrize(
        "value,kind",
        [(100.0, "duration"), (-50.0, "signed_duration"), (2.87e9, "frequency"),
         (0.8, "gain"), (25, "count"), (True, "flag"), ("log", "choice")],
    )
    def test_format_round_trips(self, value, kind):
        assert parse_value(format_value(value, kind)) == value


class TestTextFormat:
    def test_comments_and_blanks_ignored(self):
        cfg = ExperimentConfig.from_text(
            "# header\n\nlaser_time = 100 ns  # trailing\nreps = 3\n"
        )
        assert cfg.entries == {"laser_time": 100.0, "reps": 3}

    def test_bad_line_raises_with_line_number(self):
        with pytest.raises(ValueError, match="line 2"):
            ExperimentConfig.from_text("a = 1\nnot a pair\n")

    def test_round_trip_preserves_entries(self):
        cfg = demo_config(MeasurementKind.RABI)
        text = cfg.to_text(schema_for(MeasurementKind.RABI))
        again = ExperimentConfig.from_text(text, MeasurementKind.RABI)
        assert again.entries == cfg.entries
        # Serialization is canonical: a second round trip is byte-stable.
        assert again.to_text(schema_for(MeasurementKind.RABI)) == text

    def test_band_entries_rebuild_the_microwave_channel(self):
        cfg = ExperimentConfig.from_text(
            "mw_band_low = 2 GHz\nmw_band_high = 4 GHz\n"
        )
        mw = cfg.microwave_channel()
        assert (mw.band_low_hz, mw.band_high_hz) == (2e9, 4e9)

    def test_default_band_without_overrides(self):
        mw = ExperimentConfig({}).microwave_channel()
        assert (mw.band_low_hz, mw.band_high_hz) == (6e9, 10e9)


class TestAccessors:
    def test_number_and_integer(self):
        cfg = ExperimentConfig({"n": 25, "t": 100.0})
        assert cfg.number("t") == 100.0
        assert cfg.integer("n") == 25

    def test_number_rejects_non_numeric(self):
        cfg = ExperimentConfig({"mode": "fast", "on": True})
        with pytest.raises(TypeError):
            cfg.number("mode")
        with pytest.raises(TypeError):
            cfg.number("on")

    def test_with_entries_does_not_mutate(self):
        cfg = ExperimentConfig({"a": 1})
        other = cfg.with_entries(a=2, b=3)
        assert cfg.entries == {"a": 1}
        assert other.entries == {"a": 2, "b": 3}


class TestValidation:
    def test_complete_rabi_config_is_ok(self):
        cfg = demo_config(MeasurementKind.RABI)
        report = validate_config(cfg, schema_for(MeasurementKind.RABI))
        assert report.ok
        assert report.summary() == "ok"

    def test_missing_required_key_is_reported(self):
        cfg = demo_config(MeasurementKind.RABI)
        entries = {k: v for k, v in cfg.entries.items() if k != "mw_freq"}
        stripped = ExperimentConfig(entries, MeasurementKind.RABI)
        report = validate_config(stripped, schema_for(MeasurementKind.RABI))
        assert not report.ok
        assert report.missing_keys == ("mw_freq",)
        assert "missing: mw_freq" in report.summary()

    def test_frequency_outside_band_is_out_of_band(self):
        cfg = demo_config(MeasurementKind.RABI).with_entries(mw_freq=12e9)
        report = validate_config(cfg, schema_for(MeasurementKind.RABI))
        assert not report.ok
        assert len(report.out_of_band) == 1
        violation = report.out_of_band[0]
        assert violation.key == "mw_freq"
        assert violation.value == 12e9
        assert "out of band" in report.summary()

    def test_gain_outside_unit_interval(self):
        cfg = demo_config(MeasurementKind.RABI).with_entries(mw_gain=1.5)
        report = validate_config(cfg, schema_for(MeasurementKind.RABI))
        assert [v.key for v in report.out_of_band] == ["mw_gain"]

    def test_negative_duration_is_out_of_band(self):
        cfg = demo_config(MeasurementKind.RABI).with_entries(mw_wait=-5.0)
        report = validate_config(cfg, schema_for(MeasurementKind.RABI))
        assert [v.key for v in report.out_of_band] == ["mw_wait"]

    def test_signed_duration_may_be_negative(self):
        cfg = demo_config(MeasurementKind.RABI).with_entries(readout_delay=-20.0)
        report = validate_config(cfg, schema_for(MeasurementKind.RABI))
        assert report.ok

    def test_unknown_keys_warn_but_pass(self):
        cfg = demo_config(MeasurementKind.RABI).with_entries(banana=1)
        report = validate_config(cfg, schema_for(MeasurementKind.RABI))
        assert report.ok
        assert any("banana" in w for w in report.warnings)

    def test_band_override_keys_are_never_unknown(self):
        cfg = demo_config(MeasurementKind.RABI)
        assert "mw_band_low" in cfg.entries
        report = validate_config(cfg, schema_for(MeasurementKind.RABI))
        assert report.warnings == ()

    def test_wrong_typed_required_key_counts_as_missing(self):
        cfg = demo_config(MeasurementKind.RABI).with_entries(mw_freq="soon")
        report = validate_config(cfg, schema_for(MeasurementKind.RABI))
        assert "mw_freq" in report.missing_keys
        assert any("mw_freq" in w for w in report.warnings)

    def test_non_integral_count_is_out_of_band(self):
        cfg = demo_config(MeasurementKind.RABI).with_entries(n_points=2.5)
        report = validate_config(cfg, schema_for(MeasurementKind.RABI))
        assert [v.key for v in report.out_of_band] == ["n_points"]

    def test_non_finite_number_counts_as_missing(self):
        cfg = demo_config(MeasurementKind.RABI).with_entries(mw_freq=math.inf)
        report = validate_config(cfg, schema_for(MeasurementKind.RABI))
        assert "mw_freq" in report.missing_keys

    def test_violation_string_names_band(self):
        v = BandViolation("mw_freq", 12e9, 6e9, 10e9, "microwave-generator band")
        assert "mw_freq" in str(v)
        assert "12" in str(v)
