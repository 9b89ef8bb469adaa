import numpy as np
import pytest

from complobs.numerics import LabeledOperator
from complobs.states import Ensemble, stream

KET0 = np.array([1.0, 0.0])
KET1 = np.array([0.0, 1.0])
PLUS = np.array([1.0, 1.0]) / np.sqrt(2)


def proj(v):
    v = np.asarray(v, dtype=complex)
    return np.outer(v, v.conj())


def qubit_ensemble(weights, vectors, label="B"):
    return Ensemble(np.asarray(weights, float), tuple(LabeledOperator(proj(v), ((label, 2),)) for v in vectors))


def trine():
    vs = [np.array([np.cos(2 * np.pi * k / 3), np.sin(2 * np.pi * k / 3)]) for k in range(3)]
    return qubit_ensemble(np.ones(3) / 3, vs)


def random_psd(d, rng, rank=None):
    g = rng.standard_normal((d, rank or d)) + 1j * rng.standard_normal((d, rank or d))
    return g @ g.conj().T


@pytest.fixture
def rng():
    return stream(20260101)


ACCEPTANCE_LINES: dict[int, str] = {}


def record_criterion(number: int, ok: bool, detail: str) -> None:
    ACCEPTANCE_LINES[number] = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[number])
