import logging

import numpy as np
import pytest

from mnomarket.energy import NetworkModel, build_cost_curve


@pytest.fixture(scope="session")
def model():
    return NetworkModel()


@pytest.fixture(scope="session")
def curve(model):
    return build_cost_curve(model, 0.05)


@pytest.fixture(scope="session")
def fine_curve(model):
    return build_cost_curve(model, 0.01)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(autouse=True)
def _quiet_snapping(caplog):
    caplog.set_level(logging.ERROR, logger="mnomarket.market")
