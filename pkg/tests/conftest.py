import os

import numpy as np
import pytest

from rayslab.collision import CollisionOperator
from rayslab.velocity import build_grid

# pinned counter-based generator: reproducible random fields for invariants
SEED = 20240901


def make_rng(stream: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=SEED + stream))


@pytest.fixture(scope="session")
def cache_dir(tmp_path_factory):
    # reuse an on-disk cache across sessions when available to skip the
    # hard-sphere matrix assembly; falls back to a per-session directory
    persistent = os.environ.get("RAYSLAB_CACHE_DIR")
    if persistent:
        return persistent
    d = os.path.expanduser("~/.cache/rayslab")
    try:
        os.makedirs(d, exist_ok=True)
        return d
    except OSError:
        return str(tmp_path_factory.mktemp("opcache"))


# one line per acceptance criterion, echoed after the test summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def grid8():
    return build_grid(8, 6.0)


@pytest.fixture(scope="session")
def grid12():
    return build_grid(12, 6.0)


@pytest.fixture(scope="session")
def grid16():
    return build_grid(16, 6.0)


@pytest.fixture(scope="session")
def op_bgk16(grid16):
    return CollisionOperator(grid16, "bgk", nu0=1.0)


@pytest.fixture(scope="session")
def op_hs12(grid12, cache_dir):
    return CollisionOperator(grid12, "hardsphere", cache_dir=cache_dir)


@pytest.fixture(scope="session")
def op_hs16(grid16, cache_dir):
    return CollisionOperator(grid16, "hardsphere", cache_dir=cache_dir)
