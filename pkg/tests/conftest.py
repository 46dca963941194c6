import numpy as np
import pytest

from beamscan.channel import ArrayConfig, BlockageTrajectory, PathSpec, Scenario
from beamscan.scenarios import SCENARIO1_EVENTS

_ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def acceptance_log():
    return _ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_tensor(rng, shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def mini_scenario1(seed=0, noise_floor_db=40.0):
    """Scenario-1 event timing on a small delay/direction grid (fast to analyze)."""
    paths = [
        PathSpec(delay_ns=5, aod_deg=-15.0, aoa_deg=15.0, gain_db=0.0),
        PathSpec(delay_ns=13, aod_deg=15.0, aoa_deg=-15.0, gain_db=-1.0, phase_deg=60.0),
    ]
    for path, ev in zip(paths, SCENARIO1_EVENTS):
        path.trajectory = BlockageTrajectory([ev])
    return Scenario(
        id=1,
        n_blockers=1,
        paths=paths,
        n_dly=20,
        noise_floor_db=noise_floor_db,
        seed=seed,
        array=ArrayConfig(codebook_size=4),
    )


@pytest.fixture
def mini_s1():
    return mini_scenario1()
