import numpy as np
import pytest

from visual_tracking import camera as cm
from visual_tracking import config, sim
from visual_tracking import manipulator as mp


@pytest.fixture(scope="session")
def preset():
    return config.load_preset("paper-sec4")


@pytest.fixture(scope="session")
def nominal_log(preset):
    """The full 30 s nominal run, shared by every test that needs it."""
    return sim.run(preset)


@pytest.fixture
def cam():
    return cm.CameraModel.aligned()


@pytest.fixture
def model():
    return mp.ManipulatorModel((2.0, 2.0, 2.0), (2.0, 2.0, 2.0))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def criterion():
    """Record one PASS/FAIL line per acceptance criterion and return the verdict."""
    def record(number, title, passed, detail):
        line = f"[{'PASS' if passed else 'FAIL'}] criterion {number}: {title} ({detail})"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
