"""Result document and acquisition-record serialization round trips."""

import struct

import pytest

from nvlab.errors import MalformedStreamError
from nvlab.fitting import FitResult
from nvlab.instrument import MODE_ANALOG, MODE_PHOTON, AcquisitionRecord
from nvlab.kinds import MeasurementKind
from nvlab.results import (
    RESULT_HEADER,
    MeasurementResult,
    SweepAxis,
    deserialize_result,
    records_from_binary,
    records_from_text,
    records_to_binary,
    records_to_text,
    serialize_result,
)

from conftest import demo_config


def sample_records():
    return (
        AcquisitionRecord(0, 0, "signal", 100, 240, MODE_PHOTON, 17, ()),
        AcquisitionRecord(0, 1, "signal", 100, 240, MODE_PHOTON, 0, ()),
        AcquisitionRecord(2, 0, "reference", 500, 240, MODE_PHOTON, 23, ()),
        # awkward floats: repr round-tripping has to be exact
        AcquisitionRecord(3, 1, "w0", 0, 400, MODE_ANALOG, 0,
                          (0.1, -1e-17, 2.5000000000000004, 0.0)),
    )


class TestRecordText:
    def test_round_trip_is_exact(self):
        records = sample_records()
        assert records_from_text(records_to_text(records)) == records

    def test_header_row(self):
        text = records_to_text(sample_records())
        assert text.splitlines()[0] == "sweep rep tag start length mode photons samples"

    def test_empty_record_list(self):
        assert records_from_text(records_to_text(())) == ()

    def test_empty_samples_are_a_dash(self):
        line = records_to_text(sample_records()[:1]).splitlines()[1]
        assert line.endswith(" -")

    @pytest.mark.parametrize("tag", ["", "two words", "tab\tbed"])
    def test_unserializable_tags_are_rejected(self, tag):
        rec = AcquisitionRecord(0, 0, tag, 0, 1, MODE_PHOTON, 0, ())
        with pytest.raises(ValueError):
            records_to_text((rec,))

    def test_missing_header_row(self):
        with pytest.raises(MalformedStreamError):
            records_from_text("0 0 signal 0 1 photon 3 -\n")

    def test_short_record_line(self):
        text = records_to_text(sample_records()[:1]) + "0 0 signal 0 1 photon\n"
        with pytest.raises(MalformedStreamError):
            records_from_text(text)

    def test_unknown_mode_token(self):
        text = records_to_text(sample_records()[:1]).replace("photon", "quantum")
        with pytest.raises(MalformedStreamError):
            records_from_text(text)


class TestRecordBinary:
    def test_round_trip_is_exact(self):
        records = sample_records()
        assert records_from_binary(records_to_binary(records)) == records

    def test_encoding_is_deterministic(self):
        records = sample_records()
        assert records_to_binary(records) == records_to_binary(records)

    def test_empty_record_list(self):
        data = records_to_binary(())
        assert records_from_binary(data) == ()

    def test_bad_magic(self):
        data = b"NOPE" + records_to_binary(sample_records())[4:]
        with pytest.raises(MalformedStreamError):
            records_from_binary(data)

    def test_truncated_stream(self):
        data = records_to_binary(sample_records())
        with pytest.raises(MalformedStreamError):
            records_from_binary(data[: len(data) // 2])

    def test_trailing_bytes(self):
        data = records_to_binary(sample_records()) + b"\x00"
        with pytest.raises(MalformedStreamError):
            records_from_binary(data)

    def test_unknown_mode_code(self):
        data = (
            b"NVREC1\x00"
            + struct.pack("<I", 1)
            + struct.pack("<IIH", 0, 0, 1)
            + b"s"
            + struct.pack("<QQBqI", 0, 1, 9, 0, 0)
        )
        with pytest.raises(MalformedStreamError):
            records_from_binary(data)


def make_result(with_reference=True, with_fit=True, bench_params=None):
    axis = SweepAxis("mw_time", "ns", (0.0, 40.0, 80.0))
    fit = None
    derived = {}
    if with_fit:
        fit = FitResult(
            model="damped-cosine",
            params={"offset": 1.0, "amplitude": 0.25},
            std_errors={"offset": 0.01, "amplitude": 0.02},
            reduced_chi_sq=1.0625,
            converged=True,
            n_iterations=7,
            residuals=(0.001, -0.002, 0.0005),
            message="",
        )
        derived = {"pi_time": 100.0, "pi_time_err": 2.5}
    return MeasurementResult(
        kind=MeasurementKind.RABI,
        axis=axis,
        signal=(120.5, 90.25, 118.0),
        reference=(121.0, 120.5, 119.75) if with_reference else None,
        records=sample_records(),
        config=demo_config(MeasurementKind.RABI),
        params=bench_params,
        seed=20260814,
        mode=MODE_PHOTON,
        fit=fit,
        derived=derived,
    )


class TestResultDocument:
    def test_round_trip_with_fit_and_reference(self, bench_params):
        result = make_result(bench_params=bench_params)
        back = deserialize_result(serialize_result(result))
        assert back.kind is result.kind
        assert back.axis == result.axis
        assert back.signal == result.signal
        assert back.reference == result.reference
        assert back.records == result.records
        assert back.seed == result.seed
        assert back.mode == result.mode
        assert back.derived == result.derived
        assert back.fit == result.fit
        assert back.config.entries == result.config.entries
        assert back.params == result.params

    def test_round_trip_without_reference_or_fit(self, bench_params):
        result = make_result(with_reference=False, with_fit=False,
                             bench_params=bench_params)
        back = deserialize_result(serialize_result(result))
        assert back.reference is None
        assert back.fit is None
        assert back.derived == {}
        assert back.signal == result.signal

    def test_serialization_is_deterministic(self, bench_params):
        result = make_result(bench_params=bench_params)
        assert serialize_result(result) == serialize_result(result)

    def test_document_header(self, bench_params):
        text = serialize_result(make_result(bench_params=bench_params))
        assert text.splitlines()[0] == RESULT_HEADER
        assert "kind = rabi" in text

    def test_length_mismatch_is_rejected(self, bench_params):
        result = make_result(bench_params=bench_params)
        result.signal = (1.0, 2.0)
        with pytest.raises(ValueError):
            serialize_result(result)

    def test_not_a_result_document(self):
        with pytest.raises(MalformedStreamError):
            deserialize_result("# something else\n")

    @pytest.mark.parametrize("section", ["config", "params", "data", "records"])
    def test_missing_required_section(self, section, bench_params):
        text = serialize_result(make_result(bench_params=bench_params))
        kept = []
        skipping = False
        for line in text.splitlines():
            if line == f"[{section}]":
                skipping = True
                continue
            if skipping and line.startswith("["):
                skipping = False
            if not skipping:
                kept.append(line)
        with pytest.raises(MalformedStreamError):
            deserialize_result("\n".join(kept) + "\n")

    def test_wrong_data_columns(self, bench_params):
        text = serialize_result(make_result(bench_params=bench_params))
        broken = text.replace("axis signal reference", "axis signal")
        with pytest.raises(MalformedStreamError):
            deserialize_result(broken)

    def test_bad_data_row(self, bench_params):
        text = serialize_result(make_result(bench_params=bench_params))
        broken = text.replace("40.0 90.25 120.5", "40.0 90.25")
        with pytest.raises(MalformedStreamError):
            deserialize_result(broken)
