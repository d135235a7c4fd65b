"""HTTP and WebSocket front end over the run store, instrument and bench.

Request/response bodies are JSON; the stream socket carries one JSON
document per WebSocket text message (the transport's own framing is the
length delimiter). The message grammar is documented in docs/protocol.md.
"""

from __future__ import annotations

import asyncio
import contextlib
import json
from pathlib import Path

from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, PlainTextResponse

from ..config import ConfigSchema, ExperimentConfig, ValidationReport, parse_value
from ..diagram import parse_label_mode, render_diagram, serialize_diagram
from ..errors import BusyError, ConfigError, NvLabError, PhysicsError
from ..kinds import MeasurementKind, parse_kind
from ..measurements import SCHEMAS, build_program, schema_for
from ..physics import NvEnsembleParams, params_from_text, params_to_text
from ..results import MeasurementResult
from ..store import RunManifest, RunStore
from ..version import __version__
from .hub import FrameHub, StreamFrame, gap_frame
from .models import (
    AlignmentBody,
    AlignmentKnobs,
    AlignmentStartRequest,
    DiagramBody,
    DiagramBoxBody,
    DiagramLaneBody,
    DiagramRequest,
    FitBody,
    HealthBody,
    KeySpecBody,
    ManifestBody,
    ResultBody,
    RunRequest,
    RunStartedBody,
    SchemaBody,
    ValidationBody,
)
from .runner import AlignmentSession, RunCoordinator

_CONTROL_SEPARATORS = (",", ":")


def _error_json(status: int, message: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"error": message})


def _validation_body(report: ValidationReport) -> ValidationBody:
    return ValidationBody(
        ok=report.ok,
        missing_keys=list(report.missing_keys),
        out_of_band=[str(v) for v in report.out_of_band],
        warnings=list(report.warnings),
        summary=report.summary(),
    )


def _manifest_body(manifest: RunManifest) -> ManifestBody:
    return ManifestBody(
        run_id=manifest.run_id,
        kind=manifest.kind,
        seed=manifest.seed,
        mode=manifest.mode,
        status=manifest.status,
        started=manifest.started,
        finished=manifest.finished,
        error=manifest.error,
        result_path=manifest.result_path,
        config=manifest.config_text,
        physics=manifest.physics_text,
    )


def _result_body(result: MeasurementResult) -> ResultBody:
    fit = None
    if result.fit is not None:
        fit = FitBody(
            model=result.fit.model,
            params={k: float(v) for k, v in result.fit.params.items()},
            std_errors={k: float(v) for k, v in result.fit.std_errors.items()},
            reduced_chi_sq=float(result.fit.reduced_chi_sq),
            converged=result.fit.converged,
            n_iterations=result.fit.n_iterations,
            message=result.fit.message,
        )
    schema = schema_for(result.kind)
    return ResultBody(
        kind=result.kind.value,
        seed=result.seed,
        mode=result.mode,
        axis_name=result.axis.name,
        axis_unit=result.axis.unit,
        axis=[float(x) for x in result.axis.values],
        signal=[float(x) for x in result.signal],
        reference=(
            [float(x) for x in result.reference] if result.reference is not None else None
        ),
        derived={k: float(v) for k, v in result.derived.items()},
        fit=fit,
        config=result.config.to_text(schema),
        physics=params_to_text(result.params),
    )


def config_from_request(kind: MeasurementKind, raw) -> ExperimentConfig:
    """Build a config from either file text or a JSON key/value mapping."""
    if isinstance(raw, str):
        return ExperimentConfig.from_text(raw, kind)
    entries = {}
    for key, value in raw.items():
        entries[str(key)] = parse_value(value) if isinstance(value, str) else value
    return ExperimentConfig(entries, kind)


def params_from_request(base: NvEnsembleParams, raw) -> NvEnsembleParams:
    if raw is None:
        return base
    if isinstance(raw, str):
        return params_from_text(raw)
    return base.with_overrides(**raw)


def _schema_body(kind: MeasurementKind, schema: ConfigSchema) -> SchemaBody:
    keys = [
        KeySpecBody(
            name=k.name,
            kind=k.kind,
            required=k.required,
            default=k.default,
            choices=list(k.choices),
            help=k.help,
        )
        for k in schema.keys
    ]
    return SchemaBody(kind=kind.value, keys=keys)


def create_app(
    data_dir: "str | Path | None" = None,
    params: "NvEnsembleParams | None" = None,
    beam_waist_um: "float | None" = None,
    log_limit: int = 10_000,
    subscriber_limit: int = 1_024,
) -> FastAPI:
    store = RunStore(data_dir)
    hub = FrameHub(log_limit=log_limit, subscriber_limit=subscriber_limit)
    coordinator = RunCoordinator(store, hub)
    base_params = params if params is not None else NvEnsembleParams()
    alignment_kwargs = {} if beam_waist_um is None else {"beam_waist_um": beam_waist_um}
    alignment = AlignmentSession(hub, base_params, **alignment_kwargs)

    @contextlib.asynccontextmanager
    async def lifespan(_app: FastAPI):
        store.recover_interrupted()
        yield
        await alignment.stop()
        await coordinator.shutdown()

    app = FastAPI(title="nvlab control service", version=__version__, lifespan=lifespan)
    # the dashboard is static files on another origin, so browsers preflight
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    app.state.store = store
    app.state.hub = hub
    app.state.coordinator = coordinator
    app.state.alignment = alignment

    # -- status ---------------------------------------------------------------

    @app.get("/health", response_model=HealthBody)
    async def health() -> HealthBody:
        return HealthBody(
            status="ok",
            version=__version__,
            busy=coordinator.busy,
            alignment_active=alignment.active,
        )

    @app.get("/schemas")
    async def schemas() -> dict:
        bodies = [
            _schema_body(kind, SCHEMAS[kind]).model_dump()
            for kind in sorted(SCHEMAS, key=lambda k: k.value)
        ]
        return {"schemas": bodies}

    # -- runs -----------------------------------------------------------------

    @app.get("/runs")
    async def list_runs() -> dict:
        return {"runs": [_manifest_body(m).model_dump() for m in store.list_runs()]}

    @app.get("/runs/{run_id}")
    async def get_run(run_id: str):
        try:
            manifest = store.load_manifest(run_id)
        except FileNotFoundError as exc:
            return _error_json(404, str(exc))
        return _manifest_body(manifest)

    @app.get("/runs/{run_id}/result")
    async def get_result(run_id: str, format: str = "json"):
        try:
            if format == "text":
                path = store.runs_dir / run_id / "result"
                if not path.is_file():
                    raise FileNotFoundError(f"run {run_id!r} has no result file")
                return PlainTextResponse(path.read_text(encoding="utf-8"))
            result = store.load_result(run_id)
        except FileNotFoundError as exc:
            return _error_json(404, str(exc))
        return _result_body(result)

    @app.post("/runs", status_code=202, response_model=RunStartedBody)
    async def start_run(req: RunRequest):
        try:
            kind = parse_kind(req.kind)
        except ValueError as exc:
            return _error_json(400, str(exc))
        try:
            config = config_from_request(kind, req.config)
        except ValueError as exc:
            return _error_json(400, f"bad config: {exc}")
        try:
            run_params = params_from_request(base_params, req.physics)
        except (PhysicsError, TypeError, ValueError) as exc:
            return _error_json(400, f"bad physics: {exc}")
        try:
            manifest = coordinator.start(kind, config, run_params, req.seed, req.mode)
        except BusyError as exc:
            return _error_json(409, str(exc))
        except ConfigError as exc:
            return JSONResponse(
                status_code=400, content=_validation_body(exc.report).model_dump()
            )
        return RunStartedBody(run_id=manifest.run_id, kind=kind.value, status=manifest.status)

    # -- diagrams -------------------------------------------------------------

    @app.post("/diagram")
    async def diagram(req: DiagramRequest):
        try:
            kind = parse_kind(req.kind)
            mode = parse_label_mode(req.labels)
            config = config_from_request(kind, req.config)
        except ValueError as exc:
            return _error_json(400, str(exc))
        try:
            program = build_program(kind, config)
        except ConfigError as exc:
            return JSONResponse(
                status_code=400, content=_validation_body(exc.report).model_dump()
            )
        except NvLabError as exc:
            return _error_json(400, str(exc))
        diag = render_diagram(program, label_mode=mode, caption=kind.value)
        lanes = [
            DiagramLaneBody(
                channel_id=lane.channel_id,
                kind=lane.kind,
                boxes=[
                    DiagramBoxBody(
                        start_ns=b.start_ns,
                        length_ns=b.length_ns,
                        label=b.label,
                        swept=b.swept,
                    )
                    for b in lane.boxes
                ],
            )
            for lane in diag.lanes
        ]
        return DiagramBody(
            label_mode=diag.label_mode,
            caption=diag.caption,
            lanes=lanes,
            svg=serialize_diagram(diag),
        )

    # -- alignment ------------------------------------------------------------

    def _alignment_body() -> AlignmentBody:
        state = alignment.state
        return AlignmentBody(
            x_um=state.x_um,
            y_um=state.y_um,
            z_um=state.z_um,
            magnet_angle_deg=state.magnet_angle_deg,
            antenna_coupling=state.antenna_coupling,
            beam_waist_um=alignment.beam_waist_um,
            expected_pl_rate_hz=alignment.expected_pl_rate_hz(),
            active=alignment.active,
            interval_s=alignment.interval_s,
            window_ns=alignment.window_ns,
            stream=AlignmentSession.STREAM_ID,
        )

    @app.get("/alignment", response_model=AlignmentBody)
    async def get_alignment() -> AlignmentBody:
        return _alignment_body()

    @app.post("/alignment", response_model=AlignmentBody)
    async def set_alignment(knobs: AlignmentKnobs) -> AlignmentBody:
        alignment.set_knobs(**knobs.model_dump())
        return _alignment_body()

    @app.post("/alignment/start", response_model=AlignmentBody)
    async def start_alignment(req: "AlignmentStartRequest | None" = None) -> AlignmentBody:
        req = req if req is not None else AlignmentStartRequest()
        await alignment.start(interval_s=req.interval_s, window_ns=req.window_ns)
        return _alignment_body()

    @app.post("/alignment/stop", response_model=AlignmentBody)
    async def stop_alignment() -> AlignmentBody:
        await alignment.stop()
        return _alignment_body()

    # -- stream ---------------------------------------------------------------

    async def _writer(ws: WebSocket, sub) -> None:
        while True:
            batch = await sub.drain()
            for item in batch:
                if isinstance(item, StreamFrame):
                    dropped = sub.take_dropped(item.run_id)
                    if dropped:
                        await ws.send_text(gap_frame(item.run_id, dropped).to_json())
                    await ws.send_text(item.to_json())
                else:
                    await ws.send_text(
                        json.dumps(item, separators=_CONTROL_SEPARATORS, sort_keys=True)
                    )

    @app.websocket("/stream")
    async def stream(ws: WebSocket):
        await ws.accept()
        sub = hub.connect()
        writer = asyncio.create_task(_writer(ws, sub))
        try:
            while True:
                text = await ws.receive_text()
                try:
                    msg = json.loads(text)
                    op = msg.get("op")
                except (json.JSONDecodeError, AttributeError):
                    sub.offer_control({"kind": "error", "error": "message is not a JSON object"})
                    continue
                if op == "subscribe":
                    run_id = str(msg.get("run_id", ""))
                    try:
                        last_seq = int(msg.get("last_seq", -1))
                    except (TypeError, ValueError):
                        sub.offer_control({"kind": "error", "error": "last_seq must be an integer"})
                        continue
                    sub.offer_control({
                        "kind": "subscribed",
                        "run_id": run_id,
                        "replay_from": last_seq + 1,
                        "next_seq": hub.next_seq(run_id),
                    })
                    hub.attach(sub, run_id, last_seq)
                elif op == "unsubscribe":
                    run_id = str(msg.get("run_id", ""))
                    hub.detach(sub, run_id)
                    sub.offer_control({"kind": "unsubscribed", "run_id": run_id})
                elif op == "ping":
                    sub.offer_control({"kind": "pong"})
                else:
                    sub.offer_control({"kind": "error", "error": f"unknown op {op!r}"})
        except WebSocketDisconnect:
            pass
        finally:
            writer.cancel()
            with contextlib.suppress(asyncio.CancelledError):
                await writer
            hub.disconnect(sub)

    return app
