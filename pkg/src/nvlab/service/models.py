"""Request and response bodies for the HTTP side of the service."""

from __future__ import annotations

from typing import Any, Literal, Optional, Union

from pydantic import BaseModel, Field


class RunRequest(BaseModel):
    kind: str
    #: Either the config file text or a key/value mapping. String values in
    #: the mapping go through the config grammar, so "20 us" works.
    config: Union[str, dict[str, Any]] = Field(default_factory=dict)
    seed: int = 0
    mode: Literal["photon-count", "analog"] = "photon-count"
    #: Optional physics override: a full parameter snapshot (text) or a
    #: mapping of parameter overrides applied to the service baseline.
    physics: Optional[Union[str, dict[str, float]]] = None


class ValidationBody(BaseModel):
    ok: bool
    missing_keys: list[str]
    out_of_band: list[str]
    warnings: list[str]
    summary: str


class ManifestBody(BaseModel):
    run_id: str
    kind: str
    seed: int
    mode: str
    status: str
    started: str = ""
    finished: str = ""
    error: str = ""
    result_path: str = ""
    config: str = ""
    physics: str = ""


class RunStartedBody(BaseModel):
    run_id: str
    kind: str
    status: str
    stream: str = "/stream"


class FitBody(BaseModel):
    model: str
    params: dict[str, float]
    std_errors: dict[str, float]
    reduced_chi_sq: float
    converged: bool
    n_iterations: int
    message: str = ""


class ResultBody(BaseModel):
    kind: str
    seed: int
    mode: str
    axis_name: str
    axis_unit: str
    axis: list[float]
    signal: list[float]
    reference: Optional[list[float]] = None
    derived: dict[str, float] = Field(default_factory=dict)
    fit: Optional[FitBody] = None
    config: str = ""
    physics: str = ""


class AlignmentKnobs(BaseModel):
    """Partial update; omitted knobs keep their current value."""

    x_um: Optional[float] = None
    y_um: Optional[float] = None
    z_um: Optional[float] = None
    magnet_angle_deg: Optional[float] = None
    antenna_coupling: Optional[float] = None


class AlignmentBody(BaseModel):
    x_um: float
    y_um: float
    z_um: float
    magnet_angle_deg: float
    antenna_coupling: float
    beam_waist_um: float
    expected_pl_rate_hz: float
    active: bool
    interval_s: float
    window_ns: float
    stream: str = "alignment"


class AlignmentStartRequest(BaseModel):
    interval_s: Optional[float] = Field(default=None, gt=0.0)
    window_ns: Optional[float] = Field(default=None, gt=0.0)


class DiagramRequest(BaseModel):
    kind: str
    config: Union[str, dict[str, Any]] = Field(default_factory=dict)
    labels: str = "names"


class DiagramBoxBody(BaseModel):
    start_ns: float
    length_ns: float
    label: str
    swept: bool


class DiagramLaneBody(BaseModel):
    channel_id: int
    kind: str
    boxes: list[DiagramBoxBody]


class DiagramBody(BaseModel):
    label_mode: str
    caption: str
    lanes: list[DiagramLaneBody]
    svg: str


class KeySpecBody(BaseModel):
    name: str
    kind: str
    required: bool
    default: Optional[Any] = None
    choices: list[str] = Field(default_factory=list)
    help: str = ""


class SchemaBody(BaseModel):
    kind: str
    keys: list[KeySpecBody]


class HealthBody(BaseModel):
    status: str
    version: str
    busy: bool
    alignment_active: bool
