"""Command-line front end.

Exit codes: 0 success, 2 invalid input (the validation report or reason
is printed), 1 internal failure.
"""

from __future__ import annotations

import sys
from pathlib import Path

import click

from .config import ExperimentConfig
from .demos import load_demo_text, normalize_demo_name
from .diagram import parse_label_mode, render_diagram, serialize_diagram
from .errors import ConfigError, NvLabError
from .fitting import (
    MODEL_DAMPED_COSINE,
    MODEL_DECAYING_EXPONENTIAL,
    MODEL_LORENTZIAN_DIPS,
    MODEL_STRETCHED_EXPONENTIAL,
    fit_decay,
    fit_odmr,
    fit_rabi,
)
from .instrument import MODE_ANALOG, MODE_PHOTON
from .kinds import MeasurementKind, parse_kind
from .measurements import build_program, run_measurement, schema_for
from .physics import NvEnsembleParams, params_from_text, params_to_text
from .results import deserialize_result
from .store import DATA_DIR_ENV, RunStore
from .version import __version__

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_INVALID = 2


def _fail(message: str, code: int) -> "click.exceptions.Exit":
    click.echo(message, err=True)
    sys.exit(code)


def _parse_kind_arg(name: str) -> MeasurementKind:
    try:
        return parse_kind(name)
    except ValueError as exc:
        _fail(str(exc), EXIT_INVALID)


def _read_config_arg(ref: str, kind: MeasurementKind) -> ExperimentConfig:
    """A config reference is a file path, or failing that a packaged demo name."""
    path = Path(ref)
    if path.is_file():
        text = path.read_text(encoding="utf-8")
    elif normalize_demo_name(ref).startswith("demo_"):
        try:
            text = load_demo_text(ref)
        except FileNotFoundError as exc:
            _fail(str(exc), EXIT_INVALID)
    else:
        _fail(f"config file not found: {ref}", EXIT_INVALID)
    try:
        return ExperimentConfig.from_text(text, kind)
    except ValueError as exc:
        _fail(f"bad config {ref}: {exc}", EXIT_INVALID)


def _read_physics_arg(ref: "str | None") -> NvEnsembleParams:
    if ref is None:
        return NvEnsembleParams()
    path = Path(ref)
    if path.is_file():
        text = path.read_text(encoding="utf-8")
    elif normalize_demo_name(ref).startswith("demo_"):
        try:
            text = load_demo_text(ref)
        except FileNotFoundError as exc:
            _fail(str(exc), EXIT_INVALID)
    else:
        _fail(f"physics file not found: {ref}", EXIT_INVALID)
    try:
        return params_from_text(text)
    except (NvLabError, ValueError, KeyError) as exc:
        _fail(f"bad physics {ref}: {exc}", EXIT_INVALID)


@click.group()
@click.version_option(__version__, prog_name="nvlab")
def main():
    """Pulsed spin measurements on a simulated bench."""


@main.command(name="run")
@click.argument("kind")
@click.option("--config", "config_ref", required=True,
              help="Config file path, or a packaged demo name such as demo_rabi.")
@click.option("--physics", "physics_ref", default=None,
              help="Physics parameter file (or demo_physics); defaults to the stock bench.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", "out_dir", default=None,
              help=f"Data directory; defaults to ${DATA_DIR_ENV} or ./nvlab-data.")
@click.option("--mode", type=click.Choice([MODE_PHOTON, MODE_ANALOG]),
              default=MODE_PHOTON, show_default=True)
def run_cmd(kind, config_ref, physics_ref, seed, out_dir, mode):
    """Execute one measurement and persist its result and manifest."""
    measurement = _parse_kind_arg(kind)
    config = _read_config_arg(config_ref, measurement)
    params = _read_physics_arg(physics_ref)
    try:
        build_program(measurement, config)
    except ConfigError as exc:
        _fail(exc.report.summary(), EXIT_INVALID)
    except NvLabError as exc:
        _fail(str(exc), EXIT_INVALID)

    store = RunStore(out_dir)
    manifest = store.create_run(
        measurement, seed, mode,
        config_text=config.to_text(schema_for(measurement)),
        physics_text=params_to_text(params),
    )
    try:
        result = run_measurement(measurement, config, params, seed, mode=mode,
                                 keep_records=False)
        manifest = store.finish_run(manifest, result)
    except Exception as exc:
        store.fail_run(manifest, f"{type(exc).__name__}: {exc}")
        _fail(f"run failed: {exc}", EXIT_INTERNAL)

    click.echo(f"run {manifest.run_id} done")
    click.echo(f"result: {manifest.result_path}")
    for key in sorted(result.derived):
        click.echo(f"{key} = {result.derived[key]!r}")


@main.command(name="diagram")
@click.argument("kind")
@click.option("--config", "config_ref", required=True,
              help="Config file path or packaged demo name.")
@click.option("--labels", default="names", show_default=True,
              help="Box labels: names or values.")
@click.option("--out", "out_path", required=True, help="Output SVG path.")
def diagram_cmd(kind, config_ref, labels, out_path):
    """Render the pulse sequence of a config to an SVG file."""
    measurement = _parse_kind_arg(kind)
    try:
        mode = parse_label_mode(labels)
    except ValueError as exc:
        _fail(str(exc), EXIT_INVALID)
    config = _read_config_arg(config_ref, measurement)
    try:
        program = build_program(measurement, config)
    except ConfigError as exc:
        _fail(exc.report.summary(), EXIT_INVALID)
    except NvLabError as exc:
        _fail(str(exc), EXIT_INVALID)
    svg = serialize_diagram(render_diagram(program, label_mode=mode, caption=measurement.value))
    try:
        Path(out_path).write_text(svg, encoding="utf-8")
    except OSError as exc:
        _fail(f"cannot write {out_path}: {exc}", EXIT_INTERNAL)
    click.echo(f"diagram: {out_path}")


_FIT_DISPATCH = {
    MODEL_LORENTZIAN_DIPS: lambda x, y: fit_odmr(x, y),
    MODEL_DAMPED_COSINE: lambda x, y: fit_rabi(x, y)[0],
    MODEL_DECAYING_EXPONENTIAL: lambda x, y: fit_decay(x, y),
    MODEL_STRETCHED_EXPONENTIAL: lambda x, y: fit_decay(x, y, stretched=True),
}


@main.command(name="fit")
@click.argument("result_path")
@click.option("--model", "model_name", required=True,
              help="One of: " + ", ".join(sorted(_FIT_DISPATCH)) + ".")
def fit_cmd(result_path, model_name):
    """Refit a persisted result file with the named model."""
    if model_name not in _FIT_DISPATCH:
        _fail(f"unknown model {model_name!r}; expected one of: "
              + ", ".join(sorted(_FIT_DISPATCH)), EXIT_INVALID)
    path = Path(result_path)
    if not path.is_file():
        _fail(f"result file not found: {result_path}", EXIT_INVALID)
    try:
        result = deserialize_result(path.read_text(encoding="utf-8"))
    except (NvLabError, ValueError, KeyError) as exc:
        _fail(f"cannot read result: {exc}", EXIT_INVALID)
    try:
        fit = _FIT_DISPATCH[model_name](result.axis.values, result.signal)
    except NvLabError as exc:
        _fail(f"cannot fit: {exc}", EXIT_INVALID)
    except Exception as exc:
        _fail(f"fit failed: {exc}", EXIT_INTERNAL)
    click.echo(str(fit))


@main.command(name="serve")
@click.option("--data", "data_dir", default=None,
              help=f"Data directory; defaults to ${DATA_DIR_ENV} or ./nvlab-data.")
@click.option("--bind", default="127.0.0.1:8766", show_default=True,
              help="Listen address as addr:port.")
def serve_cmd(data_dir, bind):
    """Serve the HTTP API and the frame stream."""
    host, sep, port_text = bind.rpartition(":")
    if not sep or not host:
        _fail(f"bad bind address {bind!r}; expected addr:port", EXIT_INVALID)
    try:
        port = int(port_text)
    except ValueError:
        _fail(f"bad port {port_text!r}", EXIT_INVALID)

    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(data_dir), host=host, port=port, log_level="info")


if __name__ == "__main__":
    main()
