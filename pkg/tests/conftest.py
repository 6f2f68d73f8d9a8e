import numpy as np
import pytest
from hypothesis import settings

from period_dynamics.lattice import QuadraticLattice

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")


@pytest.fixture
def toy():
    return QuadraticLattice.diagonal(1, 1, 1, -1, -1)


@pytest.fixture
def toy4():
    return QuadraticLattice.diagonal(1, 1, 1, -1)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    # one line per acceptance criterion, in criterion order
    import sys

    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(results):
        ok, detail = results[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}")
