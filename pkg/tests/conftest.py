import sys

import numpy as np
import pytest
from hypothesis import settings

from focus_us.scene import uniform_linear_array
from focus_us.waveform import make_linear_fm

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")

# reference system: 3 MHz carrier, D = 60, sampled at 4 x 2.9 MHz
FS_TABLE = 4 * 2.9e6
N_S_TABLE = 1392


@pytest.fixture(scope="session")
def table_pulse():
    return make_linear_fm(3e6, 2.5e6, 24e-6, FS_TABLE)


@pytest.fixture(scope="session")
def table_array():
    return uniform_linear_array(64, 0.3e-3)


@pytest.fixture(scope="session")
def small_pulse():
    return make_linear_fm(3e6, 1.8e6, 20 / 1.8e6, FS_TABLE)


@pytest.fixture(scope="session")
def small_array():
    return uniform_linear_array(8, 0.3e-3)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "LINES", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: s.split()[1]):
            terminalreporter.write_line(line)
