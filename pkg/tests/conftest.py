import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from carbon_offload.data import load_bundled_trace
from carbon_offload.model import Location, LocationKind, MlTask, SlotObservation

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def trace():
    return load_bundled_trace()


def cloud(energy=3e-4, loss=0.02):
    return Location(0, LocationKind.CLOUD, loss, energy)


def edge(j, loss=0.12, energy=2e-5, capacity=5e12):
    return Location(j, LocationKind.EDGE, loss, energy, capacity)


def observation(bits, work=None, intensity=(1e-7, 5e-8), spot=3.0, future=1.5, slot=0):
    work = [7e11] * len(bits) if work is None else work
    tasks = tuple(MlTask(i, float(b), float(w)) for i, (b, w) in enumerate(zip(bits, work)))
    return SlotObservation(slot, np.array(intensity, dtype=float), spot, future, tasks)


# criterion number -> one-line verdict, filled by test_acceptance.py
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
