"""Shared fixtures: the demo bench physics and ready-made configs."""

import pytest

from nvlab.config import ExperimentConfig
from nvlab.demos import load_demo_text
from nvlab.kinds import MeasurementKind
from nvlab.physics import NvEnsembleParams, params_from_text


def demo_config(kind: MeasurementKind) -> ExperimentConfig:
    """The packaged demo config for a measurement kind, parsed."""
    text = load_demo_text("demo_" + kind.value.replace("-", "_"))
    return ExperimentConfig.from_text(text, kind)


@pytest.fixture
def bench_params() -> NvEnsembleParams:
    """Demo bench physics: bright ensemble, 50 MHz Zeeman splitting."""
    return params_from_text(load_demo_text("demo_physics"))


@pytest.fixture(params=list(MeasurementKind), ids=lambda k: k.value)
def each_kind(request) -> MeasurementKind:
    return request.param
