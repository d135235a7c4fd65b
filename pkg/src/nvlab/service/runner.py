"""Run orchestration and the live alignment loop.

One coordinator task owns the virtual instrument: at most one measurement
is in flight, and a second start request is rejected rather than queued.
Frames cross to the front end as immutable StreamFrames through the hub;
nothing else is shared.
"""

from __future__ import annotations

import asyncio
import time
from dataclasses import replace

from ..alignment import DEFAULT_BEAM_WAIST_UM, AlignmentState, apply_alignment, pl_factor
from ..errors import BusyError
from ..instrument import MODE_PHOTON, make_rng
from ..kinds import MeasurementKind
from ..measurements import build_program, run_measurement, schema_for
from ..physics import NvEnsembleParams, params_to_text
from ..store import STATUS_DONE, STATUS_FAILED, RunManifest, RunStore
from .hub import (
    FRAME_PL_POINT,
    FRAME_RUN_STATUS,
    FRAME_SPECTRUM_PARTIAL,
    FRAME_SWEEP_POINT,
    FrameHub,
)

_FRAME_KIND_BY_MEASUREMENT = {
    MeasurementKind.PL_INTENSITY: FRAME_PL_POINT,
    MeasurementKind.ODMR: FRAME_SPECTRUM_PARTIAL,
}


def frame_kind_for(kind: MeasurementKind) -> str:
    return _FRAME_KIND_BY_MEASUREMENT.get(kind, FRAME_SWEEP_POINT)


class RunCoordinator:
    """Exclusive executor: validates, persists, runs, streams."""

    def __init__(self, store: RunStore, hub: FrameHub):
        self._store = store
        self._hub = hub
        self._task: "asyncio.Task | None" = None

    @property
    def busy(self) -> bool:
        return self._task is not None and not self._task.done()

    def start(self, kind, config, params, seed: int, mode: str = MODE_PHOTON) -> RunManifest:
        """Begin a run in the background and return its manifest.

        Raises BusyError while another run is in flight and ConfigError
        (carrying the ValidationReport) before anything is persisted.
        """
        if self.busy:
            raise BusyError("a run is already in progress")
        build_program(kind, config)  # reject invalid configs before any disk writes
        manifest = self._store.create_run(
            kind, seed, mode,
            config_text=config.to_text(schema_for(kind)),
            physics_text=params_to_text(params),
        )
        self._task = asyncio.create_task(
            self._execute(manifest, kind, config, params, seed, mode)
        )
        return manifest

    async def _execute(self, manifest, kind, config, params, seed, mode) -> None:
        run_id = manifest.run_id
        point_kind = frame_kind_for(kind)
        try:
            result = await asyncio.to_thread(
                run_measurement, kind, config, params, seed,
                mode=mode, keep_records=False,
            )
            for i in range(len(result.signal)):
                reference = (
                    float(result.reference[i]) if result.reference is not None else None
                )
                self._hub.publish(run_id, point_kind, {
                    "index": i,
                    "axis": float(result.axis.values[i]),
                    "unit": result.axis.unit,
                    "signal": float(result.signal[i]),
                    "reference": reference,
                })
                await asyncio.sleep(0)  # let subscriber writers keep up
            self._store.finish_run(manifest, result)
            self._hub.publish(run_id, FRAME_RUN_STATUS, {
                "status": STATUS_DONE,
                "kind": kind.value,
                "n_points": len(result.signal),
                "derived": {k: float(v) for k, v in result.derived.items()},
                "error": None,
            })
        except asyncio.CancelledError:
            self._store.fail_run(manifest, "cancelled by shutdown")
            raise
        except Exception as exc:
            message = f"{type(exc).__name__}: {exc}"
            self._store.fail_run(manifest, message)
            self._hub.publish(run_id, FRAME_RUN_STATUS, {
                "status": STATUS_FAILED,
                "kind": kind.value,
                "n_points": 0,
                "derived": {},
                "error": message,
            })

    async def wait_idle(self) -> None:
        if self._task is not None:
            try:
                await self._task
            except asyncio.CancelledError:
                pass

    async def shutdown(self) -> None:
        if self.busy:
            self._task.cancel()
        await self.wait_idle()


class AlignmentSession:
    """Continuous photoluminescence loop with live bench knobs.

    Each tick draws one Poisson sample of the photon count a bright
    readout window of ``window_ns`` would collect at the current knob
    positions. The expected rate is a pure function of the knobs; all
    randomness is photon shot noise.
    """

    STREAM_ID = "alignment"

    def __init__(
        self,
        hub: FrameHub,
        base_params: "NvEnsembleParams | None" = None,
        beam_waist_um: float = DEFAULT_BEAM_WAIST_UM,
        seed: int = 2026,
    ):
        self._hub = hub
        self.base_params = base_params if base_params is not None else NvEnsembleParams()
        self.beam_waist_um = beam_waist_um
        self.state = AlignmentState()
        self.interval_s = 0.1
        self.window_ns = 100_000.0
        self._seed = seed
        self._task: "asyncio.Task | None" = None

    @property
    def active(self) -> bool:
        return self._task is not None and not self._task.done()

    def set_knobs(self, **changes) -> AlignmentState:
        applied = {k: v for k, v in changes.items() if v is not None}
        self.state = replace(self.state, **applied)
        return self.state

    def expected_pl_rate_hz(self) -> float:
        return self.base_params.pl_rate_bright_hz * pl_factor(self.state, self.beam_waist_um)

    def aligned_params(self) -> NvEnsembleParams:
        return apply_alignment(self.base_params, self.state, self.beam_waist_um)

    async def start(self, interval_s: "float | None" = None, window_ns: "float | None" = None) -> None:
        await self.stop()
        if interval_s is not None:
            self.interval_s = interval_s
        if window_ns is not None:
            self.window_ns = window_ns
        self._hub.reset(self.STREAM_ID)  # fresh session numbers from 0
        self._task = asyncio.create_task(self._loop())

    async def stop(self) -> None:
        if self._task is None:
            return
        self._task.cancel()
        try:
            await self._task
        except asyncio.CancelledError:
            pass
        self._task = None

    async def _loop(self) -> None:
        rng = make_rng(self._seed)
        t0 = time.monotonic()
        tick = 0
        while True:
            window_s = self.window_ns * 1e-9
            expected = self.expected_pl_rate_hz() * window_s
            counts = int(rng.poisson(expected))
            self._hub.publish(self.STREAM_ID, FRAME_PL_POINT, {
                "index": tick,
                "axis": round(time.monotonic() - t0, 6),
                "unit": "s",
                "signal": float(counts),
                "reference": None,
                "rate_hz": counts / window_s,
                "window_ns": self.window_ns,
            })
            tick += 1
            await asyncio.sleep(self.interval_s)
