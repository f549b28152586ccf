import numpy as np
import pytest

from ensemble_ols.datagen import ProblemInstance, ProblemSpec, generate_problem
from ensemble_ols.streams import derive_rng


def make_instance(n, p, sigma=1.0, seed=0, beta=None):
    rng = derive_rng(seed, 99)
    X = rng.standard_normal((n, p))
    if beta is None:
        beta = rng.standard_normal(p)
        beta /= np.linalg.norm(beta)
    z = rng.standard_normal(n)
    return ProblemInstance(X=X, beta=beta, y=X @ beta + sigma * z, z=z, sigma=sigma)


@pytest.fixture
def small_instance():
    return generate_problem(ProblemSpec(40, 10, sigma=1.0), derive_rng(123))


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES: list[str] = []


def record_criterion(number: int, title: str, passed: bool, detail: str) -> None:
    line = f"criterion {number} [{'PASS' if passed else 'FAIL'}] {title}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
