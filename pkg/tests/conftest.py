import pytest

from core.lstm import TrainConfig
from core.otala import PositionMap
from core.plant import DwellProfile, SimConfig, canonical_cycle, position_map, simulate
from core.trace import segment_cycles


@pytest.fixture(scope="session")
def states():
    return canonical_cycle()


@pytest.fixture(scope="session")
def pmap():
    return PositionMap(position_map())


@pytest.fixture(scope="session")
def single_cycle():
    """One noiseless pass, one sample per state, closed onto position A."""
    trace = simulate(SimConfig(cycles=1, dwell=DwellProfile.uniform(1)))
    (cycle,) = segment_cycles(trace)
    return cycle


@pytest.fixture(scope="session")
def small_trace():
    return simulate(SimConfig(cycles=6, seed=3))


@pytest.fixture
def tiny_train_config():
    return TrainConfig(hidden=6, epochs=5, seed=1)
