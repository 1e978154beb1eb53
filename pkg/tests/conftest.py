import numpy as np
import pytest

from qcompress.hilbert import DensityMatrix, random_density


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_pair(rng, N, rank=None):
    return random_density(N, rank, rng), random_density(N, None, rng)


def diag_state(*p) -> DensityMatrix:
    return DensityMatrix(np.diag(np.asarray(p, dtype=float)))


ACCEPTANCE_LINES: list[str] = []


def record(criterion: int, passed: bool, detail: str) -> bool:
    line = f"{'PASS' if passed else 'FAIL'} criterion {criterion}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
