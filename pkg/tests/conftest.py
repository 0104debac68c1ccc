import numpy as np
import pytest

from ebenkit import backend
from ebenkit.audio import AudioBuffer
from ebenkit.rng import SplitMix64


@pytest.fixture(params=backend.available())
def kernel_backend(request):
    """Run a test once per available kernel backend."""
    previous = backend.name()
    backend.use(request.param)
    yield request.param
    backend.use(previous)


def noise(n, seed=0, scale=0.1, rate=16000):
    return AudioBuffer(scale * SplitMix64(seed).normal(n), rate)


def db(x):
    return 20 * np.log10(np.abs(x))


ACCEPTANCE_KEY = pytest.StashKey[list]()


@pytest.fixture(scope="session")
def acceptance_log(request):
    """Collects one result line per acceptance criterion for the terminal summary."""
    return request.config.stash.setdefault(ACCEPTANCE_KEY, [])


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
