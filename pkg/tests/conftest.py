import numpy as np
import pytest

from glntsp.graph import TspInstance

ACCEPTANCE_RESULTS: list[tuple[str, bool, str]] = []


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def unit_square():
    return TspInstance([[0, 0], [1, 0], [1, 1], [0, 1]])


@pytest.fixture
def record_criterion():
    def record(name: str, passed: bool, detail: str) -> None:
        ACCEPTANCE_RESULTS.append((name, passed, detail))
        print(f"{'PASS' if passed else 'FAIL'} {name}: {detail}")

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, passed, detail in ACCEPTANCE_RESULTS:
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {name}: {detail}")
