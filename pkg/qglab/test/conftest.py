import numpy as np
import pytest

from qglab.core import reset_runtime_config
from qglab.model import LayerStack, ModelParameters, spectral
from qglab.verify import GridSpec

REFERENCE_STACK = {"m": 3, "H": [600.0, 1400.0, 2000.0], "gprime": [0.02, 0.03], "f0": 1e-4, "beta": 1.6e-11,
                   "rho0": 1000.0}


@pytest.fixture(autouse=True)
def runtime_config(monkeypatch, tmp_path):
    """每个用例使用独立的运行配置与输出目录"""
    monkeypatch.setenv("QGLAB_OUTPUT_DIR", str(tmp_path / "output"))
    reset_runtime_config()
    yield
    reset_runtime_config()


@pytest.fixture
def stack() -> LayerStack:
    return LayerStack.from_dict(REFERENCE_STACK)


@pytest.fixture
def model(stack) -> ModelParameters:
    return ModelParameters.from_stack(stack)


@pytest.fixture
def spectrum(model):
    return spectral(model.F)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def eddy_grid() -> GridSpec:
    """以原点为中心、宽 400 km 的网格"""
    return GridSpec.square(2.0e5, 33)
