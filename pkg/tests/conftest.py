import numpy as np
import pytest

_P = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def kron_letters(letters: str) -> np.ndarray:
    """Tensor product with qubit 0 as the least significant index bit."""
    out = np.array([[1.0 + 0j]])
    for ch in reversed(letters):
        out = np.kron(out, _P[ch])
    return out


def kron_text(text: str) -> np.ndarray:
    """Dense matrix of '+XYZ'-style text built from 2x2 factors."""
    k = 0
    while k < len(text) and text[k] in "+-i":
        k += 1
    phase = {"": 1, "+": 1, "-": -1, "+i": 1j, "i": 1j, "-i": -1j}[text[:k]]
    return phase * kron_letters(text[k:])


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
