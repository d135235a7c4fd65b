"""Measurement results and their on-disk forms.

A MeasurementResult bundles everything needed to reproduce or re-analyze
a run: the sweep axis, per-point aggregates, raw acquisition records,
the config and physics snapshots, the RNG seed, and any fit. It
serializes to a self-describing text document (metadata header plus
columnar data sections); acquisition records additionally have a compact
binary form for bulk storage. Both directions round-trip exactly:
floats travel as repr strings or as raw IEEE doubles.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

from .config import ExperimentConfig
from .errors import MalformedStreamError
from .fitting import FitResult
from .instrument import MODE_ANALOG, MODE_PHOTON, AcquisitionRecord
from .kinds import MeasurementKind
from .physics import NvEnsembleParams, params_from_text, params_to_text

RESULT_HEADER = "# nvlab-result 1"


@dataclass(frozen=True)
class SweepAxis:
    name: str
    unit: str
    values: tuple[float, ...]


@dataclass
class MeasurementResult:
    kind: MeasurementKind
    axis: SweepAxis
    signal: tuple[float, ...]
    reference: "tuple[float, ...] | None"
    records: tuple[AcquisitionRecord, ...]
    config: ExperimentConfig
    params: NvEnsembleParams
    seed: int
    mode: str
    fit: "FitResult | None" = None
    derived: dict[str, float] = field(default_factory=dict)


# ---------------------------------------------------------------------------
# Acquisition records: columnar text and compact binary

_RECORD_COLUMNS = "sweep rep tag start length mode photons samples"
_RECORD_MAGIC = b"NVREC1\x00"
_MODE_CODE = {MODE_PHOTON: 0, MODE_ANALOG: 1}
_CODE_MODE = {v: k for k, v in _MODE_CODE.items()}


def _samples_text(samples: tuple[float, ...]) -> str:
    if not samples:
        return "-"
    return ",".join(repr(v) for v in samples)


def records_to_text(records: "tuple[AcquisitionRecord, ...] | list[AcquisitionRecord]") -> str:
    lines = [_RECORD_COLUMNS]
    for rec in records:
        # tags are single tokens; whitespace would corrupt the column split
        if not rec.window_tag or any(c.isspace() for c in rec.window_tag):
            raise ValueError(f"unserializable window tag {rec.window_tag!r}")
        lines.append(
            f"{rec.sweep_index} {rec.rep_index} {rec.window_tag} "
            f"{rec.start_cycle} {rec.length_cycles} {rec.mode} "
            f"{rec.photon_count} {_samples_text(rec.analog_samples)}"
        )
    return "\n".join(lines) + "\n"


def records_from_text(text: str) -> tuple[AcquisitionRecord, ...]:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0].split() != _RECORD_COLUMNS.split():
        raise MalformedStreamError("missing record header row")
    out = []
    for line in lines[1:]:
        parts = line.split()
        if len(parts) != 8:
            raise MalformedStreamError(f"bad record line: {line!r}")
        if parts[5] not in _MODE_CODE:
            raise MalformedStreamError(f"unknown record mode {parts[5]!r}")
        samples = () if parts[7] == "-" else tuple(float(v) for v in parts[7].split(","))
        out.append(
            AcquisitionRecord(
                sweep_index=int(parts[0]),
                rep_index=int(parts[1]),
                window_tag=parts[2],
                start_cycle=int(parts[3]),
                length_cycles=int(parts[4]),
                mode=parts[5],
                photon_count=int(parts[6]),
                analog_samples=samples,
            )
        )
    return tuple(out)


def records_to_binary(records: "tuple[AcquisitionRecord, ...] | list[AcquisitionRecord]") -> bytes:
    out = [_RECORD_MAGIC, struct.pack("<I", len(records))]
    for rec in records:
        tag = rec.window_tag.encode("utf-8")
        out.append(
            struct.pack(
                "<IIH", rec.sweep_index, rec.rep_index, len(tag)
            )
        )
        out.append(tag)
        out.append(
            struct.pack(
                "<QQBqI",
                rec.start_cycle,
                rec.length_cycles,
                _MODE_CODE[rec.mode],
                rec.photon_count,
                len(rec.analog_samples),
            )
        )
        if rec.analog_samples:
            out.append(struct.pack(f"<{len(rec.analog_samples)}d", *rec.analog_samples))
    return b"".join(out)


def records_from_binary(data: bytes) -> tuple[AcquisitionRecord, ...]:
    if not data.startswith(_RECORD_MAGIC):
        raise MalformedStreamError("bad record magic")
    pos = len(_RECORD_MAGIC)

    def take(fmt: str):
        nonlocal pos
        size = struct.calcsize(fmt)
        if pos + size > len(data):
            raise MalformedStreamError("truncated record data")
        vals = struct.unpack_from(fmt, data, pos)
        pos += size
        return vals

    (count,) = take("<I")
    out = []
    for _ in range(count):
        sweep, rep, tag_len = take("<IIH")
        if pos + tag_len > len(data):
            raise MalformedStreamError("truncated record tag")
        tag = data[pos : pos + tag_len].decode("utf-8")
        pos += tag_len
        start, length, mode_code, photons, n_samples = take("<QQBqI")
        if mode_code not in _CODE_MODE:
            raise MalformedStreamError(f"unknown record mode code {mode_code}")
        samples = take(f"<{n_samples}d") if n_samples else ()
        out.append(
            AcquisitionRecord(
                sweep_index=sweep,
                rep_index=rep,
                window_tag=tag,
                start_cycle=start,
                length_cycles=length,
                mode=_CODE_MODE[mode_code],
                photon_count=photons,
                analog_samples=tuple(samples),
            )
        )
    if pos != len(data):
        raise MalformedStreamError("trailing bytes after last record")
    return tuple(out)


# ---------------------------------------------------------------------------
# MeasurementResult text document

def _fit_lines(fit: FitResult) -> list[str]:
    lines = [
        "[fit]",
        f"model = {fit.model}",
        f"converged = {'yes' if fit.converged else 'no'}",
        f"n_iterations = {fit.n_iterations}",
        f"reduced_chi_sq = {fit.reduced_chi_sq!r}",
        f"message = {fit.message}",
    ]
    for name, value in fit.params.items():
        lines.append(f"param {name} = {value!r} {fit.std_errors[name]!r}")
    lines.append("residuals = " + (",".join(repr(v) for v in fit.residuals) or "-"))
    return lines


def _parse_fit(lines: list[str]) -> FitResult:
    meta: dict[str, str] = {}
    params: dict[str, float] = {}
    errors: dict[str, float] = {}
    residuals: tuple[float, ...] = ()
    for line in lines:
        if line.startswith("param "):
            body = line[len("param "):]
            name, _, rest = body.partition(" = ")
            val, err = rest.split()
            params[name] = float(val)
            errors[name] = float(err)
        elif line.startswith("residuals = "):
            body = line[len("residuals = "):]
            residuals = () if body == "-" else tuple(float(v) for v in body.split(","))
        else:
            key, _, val = line.partition(" = ")
            meta[key] = val
    return FitResult(
        model=meta["model"],
        params=params,
        std_errors=errors,
        reduced_chi_sq=float(meta["reduced_chi_sq"]),
        converged=meta["converged"] == "yes",
        n_iterations=int(meta["n_iterations"]),
        residuals=residuals,
        message=meta.get("message", ""),
    )


def serialize_result(result: MeasurementResult) -> str:
    n = len(result.axis.values)
    if len(result.signal) != n or (result.reference is not None and len(result.reference) != n):
        raise ValueError("axis, signal, and reference lengths disagree")
    lines = [
        RESULT_HEADER,
        f"kind = {result.kind.value}",
        f"seed = {result.seed}",
        f"mode = {result.mode}",
        f"axis_name = {result.axis.name}",
        f"axis_unit = {result.axis.unit}",
        f"has_reference = {'yes' if result.reference is not None else 'no'}",
    ]
    if result.derived:
        lines.append("[derived]")
        for key in sorted(result.derived):
            lines.append(f"{key} = {result.derived[key]!r}")
    lines.append("[config]")
    lines.extend(result.config.to_text().splitlines())
    lines.append("[params]")
    lines.extend(params_to_text(result.params).splitlines())
    if result.fit is not None:
        lines.extend(_fit_lines(result.fit))
    lines.append("[data]")
    if result.reference is not None:
        lines.append("axis signal reference")
        for x, s, r in zip(result.axis.values, result.signal, result.reference):
            lines.append(f"{x!r} {s!r} {r!r}")
    else:
        lines.append("axis signal")
        for x, s in zip(result.axis.values, result.signal):
            lines.append(f"{x!r} {s!r}")
    lines.append("[records]")
    lines.extend(records_to_text(result.records).splitlines())
    return "\n".join(lines) + "\n"


def _split_sections(text: str) -> "tuple[list[str], dict[str, list[str]]]":
    preamble: list[str] = []
    sections: dict[str, list[str]] = {}
    current = preamble
    for raw in text.splitlines():
        line = raw.rstrip("\n")
        if line.startswith("[") and line.endswith("]"):
            name = line[1:-1]
            sections[name] = []
            current = sections[name]
        else:
            current.append(line)
    return preamble, sections


def deserialize_result(text: str) -> MeasurementResult:
    preamble, sections = _split_sections(text)
    if not preamble or preamble[0].strip() != RESULT_HEADER:
        raise MalformedStreamError("not a result document")
    meta: dict[str, str] = {}
    for line in preamble[1:]:
        if not line.strip():
            continue
        key, _, val = line.partition(" = ")
        meta[key.strip()] = val
    for required in ("config", "params", "data", "records"):
        if required not in sections:
            raise MalformedStreamError(f"result document missing [{required}] section")

    derived: dict[str, float] = {}
    for line in sections.get("derived", ()):
        if not line.strip():
            continue
        key, _, val = line.partition(" = ")
        derived[key.strip()] = float(val)

    kind = MeasurementKind(meta["kind"])
    config = ExperimentConfig.from_text("\n".join(sections["config"]), kind)
    params = params_from_text("\n".join(sections["params"]))
    fit = None
    if "fit" in sections:
        fit = _parse_fit([ln for ln in sections["fit"] if ln.strip()])

    data_lines = [ln for ln in sections["data"] if ln.strip()]
    if not data_lines:
        raise MalformedStreamError("empty [data] section")
    columns = data_lines[0].split()
    has_reference = meta.get("has_reference") == "yes"
    expected = ["axis", "signal", "reference"] if has_reference else ["axis", "signal"]
    if columns != expected:
        raise MalformedStreamError(f"unexpected data columns {columns}")
    axis_values, signal, reference = [], [], []
    for line in data_lines[1:]:
        parts = line.split()
        if len(parts) != len(expected):
            raise MalformedStreamError(f"bad data row: {line!r}")
        axis_values.append(float(parts[0]))
        signal.append(float(parts[1]))
        if has_reference:
            reference.append(float(parts[2]))

    records = records_from_text("\n".join(sections["records"]))
    return MeasurementResult(
        kind=kind,
        axis=SweepAxis(meta["axis_name"], meta["axis_unit"], tuple(axis_values)),
        signal=tuple(signal),
        reference=tuple(reference) if has_reference else None,
        records=records,
        config=config,
        params=params,
        seed=int(meta["seed"]),
        mode=meta["mode"],
        fit=fit,
        derived=derived,
    )
