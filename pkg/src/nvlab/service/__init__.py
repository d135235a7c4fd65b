"""Control service: HTTP endpoints plus a WebSocket frame stream."""

from .app import config_from_request, create_app, params_from_request
from .hub import (
    FRAME_KINDS,
    FRAME_PL_POINT,
    FRAME_RUN_STATUS,
    FRAME_SPECTRUM_PARTIAL,
    FRAME_SWEEP_POINT,
    OUT_OF_BAND_SEQ,
    FrameHub,
    StreamFrame,
    gap_frame,
)
from .runner import AlignmentSession, RunCoordinator, frame_kind_for

__all__ = [
    "AlignmentSession",
    "FRAME_KINDS",
    "FRAME_PL_POINT",
    "FRAME_RUN_STATUS",
    "FRAME_SPECTRUM_PARTIAL",
    "FRAME_SWEEP_POINT",
    "FrameHub",
    "OUT_OF_BAND_SEQ",
    "RunCoordinator",
    "StreamFrame",
    "config_from_request",
    "create_app",
    "frame_kind_for",
    "gap_frame",
    "params_from_request",
]
