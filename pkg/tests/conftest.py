import math

import numpy as np
import pytest

from subdiff_cq.fem1d import Coefficient, Mesh1D, assemble_mass


@pytest.fixture
def time_coefficient():
    return Coefficient(lambda x, t: np.full(np.shape(x), 2.0 + math.cos(t)), lam=3.0)


@pytest.fixture
def small_mesh():
    return Mesh1D(40)


@pytest.fixture(scope="session")
def fine_mesh():
    return Mesh1D(1000)


@pytest.fixture(scope="session")
def fine_mass(fine_mesh):
    return assemble_mass(fine_mesh)


def pytest_configure(config):
    config.acceptance_lines = []


@pytest.fixture
def criterion_log(request):
    """Collects one PASS/FAIL line per acceptance criterion for the terminal summary."""
    lines = request.config.acceptance_lines

    def record(label, passed, detail):
        line = f"[{'PASS' if passed else 'FAIL'}] {label}: {detail}"
        lines.append(line)
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if config.acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in config.acceptance_lines:
            terminalreporter.write_line(line)
