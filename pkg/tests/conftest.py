import numpy as np
import pytest

from locomanip.robot import load_robot_model


@pytest.fixture(scope="session")
def model():
    return load_robot_model()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
