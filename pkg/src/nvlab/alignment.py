"""Apparatus alignment model for live steering.

Three knob groups modulate the ensemble physics the way a bench does:
stage offsets defocus the collection spot (gaussian in the radial
miss distance), the magnet angle projects the bias field onto the NV
axis (cosine), and the antenna coupling scales the achievable Rabi
rate. Pure function of the knob vector, so identical knobs always give
identical expected rates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .physics import NvEnsembleParams

DEFAULT_BEAM_WAIST_UM = 2.0

# Rates in the physics model are strictly positive; a fully misaligned
# bench still collects stray light and couples residual drive.
_FACTOR_FLOOR = 1e-9


@dataclass(frozen=True)
class AlignmentState:
    x_um: float = 0.0
    y_um: float = 0.0
    z_um: float = 0.0
    magnet_angle_deg: float = 0.0
    antenna_coupling: float = 1.0

    def offset_um(self) -> float:
        return math.sqrt(self.x_um**2 + self.y_um**2 + self.z_um**2)


def pl_factor(state: AlignmentState, beam_waist_um: float = DEFAULT_BEAM_WAIST_UM) -> float:
    """Gaussian collection falloff; offset = waist costs a factor 1/e."""
    miss = state.offset_um() / beam_waist_um
    return max(math.exp(-(miss * miss)), _FACTOR_FLOOR)


def field_factor(state: AlignmentState) -> float:
    """Axial projection of the bias field."""
    return math.cos(math.radians(state.magnet_angle_deg))


def antenna_factor(state: AlignmentState) -> float:
    return min(max(state.antenna_coupling, _FACTOR_FLOOR), 1.0)


def apply_alignment(
    params: NvEnsembleParams,
    state: AlignmentState,
    beam_waist_um: float = DEFAULT_BEAM_WAIST_UM,
) -> NvEnsembleParams:
    """The ensemble an operator would actually see at these knob values."""
    return params.with_overrides(
        pl_rate_bright_hz=params.pl_rate_bright_hz * pl_factor(state, beam_waist_um),
        bias_field_t=params.bias_field_t * field_factor(state),
        rabi_rate_hz=params.rabi_rate_hz * antenna_factor(state),
    )
