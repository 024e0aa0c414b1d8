import math

import numpy as np
import pytest

from memobs import ExponentialKernel, ModalCache, SpectralBasis


@pytest.fixture(scope="session")
def cache():
    """One modal cache shared by the unit tests; marches are deterministic so
    sharing never couples tests, it only avoids re-solving the same modes."""
    return ModalCache()


@pytest.fixture(scope="session")
def basis_pi8():
    return SpectralBasis(math.pi, 8)


@pytest.fixture(scope="session")
def exp_kernel():
    return ExponentialKernel(1.0, 0.0)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20260822)


_CRITERION_LINES: list[str] = []


@pytest.fixture
def record_criterion():
    """Collect one verdict line per acceptance criterion; the terminal
    summary prints them even when pytest captures stdout."""

    def record(num: str, ok: bool, detail: str) -> None:
        verdict = "PASS" if ok else "FAIL"
        _CRITERION_LINES.append(f"criterion {num} {verdict}  {detail}")

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _CRITERION_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(_CRITERION_LINES):
        terminalreporter.write_line(line)
