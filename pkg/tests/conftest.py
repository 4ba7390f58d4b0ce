import numpy as np
import pytest

from matsl.core import make_problem, validate_boundary

STAR3_T2 = np.full((3, 3), 1.0 / 3.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def boundary(name: str):
    """Named boundary conditions used throughout the suite."""
    if name == "dd":
        return validate_boundary(np.zeros((1, 1)), np.zeros((1, 1)))
    if name == "rr":
        return validate_boundary(np.eye(1), np.eye(1))
    if name == "mixed":
        return validate_boundary(np.diag([1.0, 0.0]), np.diag([0.0, 1.0]))
    if name == "star3":
        return validate_boundary(np.zeros((3, 3)), STAR3_T2)
    raise KeyError(name)


def zero_problem(name: str):
    b = boundary(name)
    return make_problem(None, b.T1, b.T2)


# one summary line per acceptance criterion, filled by test_acceptance.py
ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
