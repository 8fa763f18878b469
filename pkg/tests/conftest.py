import numpy as np
import pytest

from mfgpdi.hamiltonian import ControlSetSpec, control_set_hamiltonian


def sample_control_hamiltonian():
    """Piecewise-linear Hamiltonian with x-dependent drifts and costs."""
    control = ControlSetSpec(
        controls=np.linspace(-1.0, 1.0, 9),
        drift=lambda x, a: a * (1.0 + x) / 2.0,
        cost=lambda x, a: 0.5 * a * a + 0.1 * x,
    )
    return control_set_hamiltonian(control, name="sample-control")


@pytest.fixture
def control_ham():
    return sample_control_hamiltonian()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


ACCEPTANCE_LINES = []


def record_acceptance(number, title, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {title} | {detail}"
    ACCEPTANCE_LINES.append((number, line))
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(line)
