"""Exception hierarchy shared across the package."""


class NvLabError(Exception):
    """Base class for all package errors."""


class ConfigError(NvLabError):
    """A measurement was asked to run with an invalid configuration.

    Carries the ValidationReport that failed so callers can show the
    operator exactly which keys are missing or out of range.
    """

    def __init__(self, report, message="configuration failed validation"):
        super().__init__(message)
        self.report = report


class ProgramError(NvLabError):
    """A pulse program violates a structural constraint."""


class OverlapError(ProgramError):
    """Two events on the same channel occupy overlapping cycles."""

    def __init__(self, channel, first, second, overlap_cycles, sweep_index=0):
        super().__init__(
            f"channel {channel}: events overlap by {overlap_cycles} cycles "
            f"at sweep point {sweep_index}: {first} / {second}"
        )
        self.channel = channel
        self.first = first
        self.second = second
        self.overlap_cycles = overlap_cycles
        self.sweep_index = sweep_index


class BandError(ProgramError):
    """A microwave frequency falls outside its channel's band."""


class EpochOverflowError(ProgramError):
    """An event extends past the program's declared epoch length."""


class MalformedStreamError(NvLabError):
    """An instruction stream is structurally invalid (loops, HALT, ...)."""


class PhysicsError(NvLabError):
    """Invalid physics parameters or an unsupported stimulus pattern."""


class DimensionError(NvLabError):
    """Array arguments have inconsistent or insufficient lengths."""


class BusyError(NvLabError):
    """The (virtual) instrument is already owned by another run."""
