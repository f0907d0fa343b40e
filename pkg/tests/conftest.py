import numpy as np
import pytest

from sandgait.model import AnthropometricTable, Participant


@pytest.fixture
def participant():
    return Participant(id="p01", height=1.75, mass=74.5)


@pytest.fixture
def table():
    return AnthropometricTable.default()


@pytest.fixture
def rng():
    return np.random.default_rng(20260826)
