import os
from pathlib import Path

import pytest

from transbem.mesh import make_icosphere
from transbem.spaces import build_space

# persistent matrix cache for the expensive suites; override with TRANSBEM_CACHE_DIR
TEST_CACHE = Path(os.environ.get("TRANSBEM_TEST_CACHE", Path.home() / ".cache" / "transbem-tests"))


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running numerical check")


@pytest.fixture(scope="session")
def sphere_spaces():
    cache = {}

    def get(level, radius=1.0):
        key = (level, radius)
        if key not in cache:
            cache[key] = build_space(make_icosphere(radius, level))
        return cache[key]

    return get


@pytest.fixture(scope="session")
def matrix_cache():
    from transbem.cache import MatrixCache

    return MatrixCache(TEST_CACHE)


# one line per acceptance criterion, printed at the end of the run
ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
        terminalreporter.write_line(line)
