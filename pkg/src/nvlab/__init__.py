"""Desk-scale NV-center measurement stack: pulse compiler, virtual
instrument, analysis, and a control service, with no hardware in the
loop."""

from .channels import Channel, ChannelKind, default_channels
from .clocks import ClockSpec, cycles_to_ns, ns_to_cycles
from .compiler import ShotEvent, compile, decompile
from .config import (
    ConfigSchema,
    ExperimentConfig,
    KeySpec,
    ValidationReport,
    validate_config,
)
from .diagram import SequenceDiagram, render_diagram, serialize_diagram
from .errors import (
    BandError,
    BusyError,
    ConfigError,
    DimensionError,
    EpochOverflowError,
    MalformedStreamError,
    NvLabError,
    OverlapError,
    PhysicsError,
    ProgramError,
)
from .fitting import FitResult, fit_decay, fit_least_squares, fit_odmr, fit_rabi
from .instrument import AcquisitionRecord, execute, make_rng
from .isa import InstructionStream
from .kinds import MeasurementKind, parse_kind
from .measurements import build_program, run_measurement, schema_for
from .physics import NvEnsembleParams, params_from_text, params_to_text
from .program import (
    Affine,
    LaserPulse,
    MicrowavePulse,
    PulseEvent,
    PulseProgram,
    Sweep,
    TriggerWindow,
    check_timing,
)
from .readout import optimize_readout_window
from .results import (
    MeasurementResult,
    SweepAxis,
    deserialize_result,
    serialize_result,
)

from .version import __version__

__all__ = [
    "AcquisitionRecord",
    "Affine",
    "BandError",
    "BusyError",
    "Channel",
    "ChannelKind",
    "ClockSpec",
    "ConfigError",
    "ConfigSchema",
    "DimensionError",
    "EpochOverflowError",
    "ExperimentConfig",
    "FitResult",
    "InstructionStream",
    "KeySpec",
    "LaserPulse",
    "MalformedStreamError",
    "MeasurementKind",
    "MeasurementResult",
    "MicrowavePulse",
    "NvEnsembleParams",
    "NvLabError",
    "OverlapError",
    "PhysicsError",
    "ProgramError",
    "PulseEvent",
    "PulseProgram",
    "SequenceDiagram",
    "ShotEvent",
    "Sweep",
    "SweepAxis",
    "TriggerWindow",
    "ValidationReport",
    "build_program",
    "check_timing",
    "compile",
    "cycles_to_ns",
    "decompile",
    "default_channels",
    "deserialize_result",
    "execute",
    "fit_decay",
    "fit_least_squares",
    "fit_odmr",
    "fit_rabi",
    "make_rng",
    "ns_to_cycles",
    "optimize_readout_window",
    "params_from_text",
    "params_to_text",
    "parse_kind",
    "render_diagram",
    "run_measurement",
    "schema_for",
    "serialize_diagram",
    "serialize_result",
    "validate_config",
]
