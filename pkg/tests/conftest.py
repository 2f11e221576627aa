import numpy as np
import pytest
from hypothesis import settings

from coherence_control.dynamics import SystemModel
from coherence_control.models import paper_defaults
from coherence_control.operators import DecoherenceChannel

settings.register_profile("repo", derandomize=True, deadline=None)
settings.load_profile("repo")

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.diag([1.0, -1.0]).astype(complex)
SMINUS = np.array([[0, 1], [0, 0]], dtype=complex)

# criterion number -> (label, passed, detail); filled by test_acceptance.py
ACCEPTANCE: dict[int, tuple[str, bool, str]] = {}


def toy_qubit(drive_freq=0.7) -> SystemModel:
    """Driven qubit with decay and dephasing; small enough for brute-force checks."""
    channel = DecoherenceChannel(np.array([SMINUS, SZ]), np.array([0.2, 0.05]))
    return SystemModel(0.5 * SZ, channel, lambda t: np.cos(drive_freq * t) * SX)


TOY_RHO0 = np.array([[0.6, 0.2 - 0.1j], [0.2 + 0.1j, 0.4]])


@pytest.fixture
def toy():
    return toy_qubit()


@pytest.fixture(scope="session")
def defaults():
    return paper_defaults()


@pytest.fixture(scope="session")
def qutrit(defaults):
    return defaults.model()


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        label, ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {n:2d}. {label}: {detail}")
