"""Symplectic representation of N-qubit Pauli strings.

A string is stored as ``i**phase * X^x Z^z`` where ``x`` and ``z`` are
integer bitmasks (bit ``j`` refers to qubit ``j``) and ``phase`` is taken
mod 4. With this convention a single ``Y`` is ``i X Z``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .gf2 import mask_from_indices, parity

DENSE_QUBIT_CAP = 12

_PHASE_TEXT = {0: "+", 1: "+i", 2: "-", 3: "-i"}
_TEXT_PHASE = {"+": 0, "+i": 1, "i": 1, "-": 2, "-i": 3, "": 0}


class DimensionError(ValueError):
    """Operands act on different numbers of qubits."""


class DenseCapError(ValueError):
    """Dense matrix requested above the oracle cap."""


def _popcount(x: int) -> int:
    return bin(x).count("1")


@dataclass(frozen=True)
class PauliString:
    """Pauli operator ``i**phase * X^x_mask Z^z_mask`` on ``n_qubits`` qubits.

    Parameters
    ----------
    n_qubits : int
    x_mask, z_mask : int
        Bitmasks with bit ``j`` for qubit ``j``.
    phase : int
        Power of ``i`` (reduced mod 4).
    """

    n_qubits: int
    x_mask: int = 0
    z_mask: int = 0
    phase: int = 0

    def __post_init__(self):
        if self.n_qubits < 0:
            raise ValueError("n_qubits must be non-negative")
        limit = 1 << self.n_qubits
        if not (0 <= self.x_mask < limit and 0 <= self.z_mask < limit):
            raise ValueError("masks exceed n_qubits bits")
        object.__setattr__(self, "phase", int(self.phase) % 4)

    # constructors -------------------------------------------------------

    @classmethod
    def identity(cls, n_qubits: int) -> "PauliString":
        return cls(n_qubits)

    @classmethod
    def from_support(cls, n_qubits: int, qubits: Iterable[int], kind: str) -> "PauliString":
        """Pure X or pure Z string on ``qubits``; ``kind`` is 'X' or 'Z'."""
        qubits = list(qubits)
        for q in qubits:
            if not 0 <= q < n_qubits:
                raise IndexError(f"qubit {q} out of range")
        m = mask_from_indices(qubits)
        if kind == "X":
            return cls(n_qubits, x_mask=m)
        if kind == "Z":
            return cls(n_qubits, z_mask=m)
        raise ValueError("kind must be 'X' or 'Z'")

    @classmethod
    def single(cls, n_qubits: int, qubit: int, letter: str) -> "PauliString":
        if not 0 <= qubit < n_qubits:
            raise IndexError(f"qubit {qubit} out of range")
        b = 1 << qubit
        if letter == "X":
            return cls(n_qubits, x_mask=b)
        if letter == "Z":
            return cls(n_qubits, z_mask=b)
        if letter == "Y":
            return cls(n_qubits, x_mask=b, z_mask=b, phase=1)
        if letter == "I":
            return cls(n_qubits)
        raise ValueError(f"unknown Pauli letter {letter!r}")

    @classmethod
    def from_text(cls, text: str) -> "PauliString":
        """Parse ``'+XIZY'``-style text (sign, then one letter per qubit)."""
        text = text.strip()
        k = 0
        while k < len(text) and text[k] in "+-i":
            k += 1
        sign, letters = text[:k], text[k:]
        if sign not in _TEXT_PHASE:
            raise ValueError(f"bad phase prefix {sign!r}")
        x = z = 0
        n_y = 0
        for j, ch in enumerate(letters):
            if ch == "X":
                x |= 1 << j
            elif ch == "Z":
                z |= 1 << j
            elif ch == "Y":
                x |= 1 << j
                z |= 1 << j
                n_y += 1
            elif ch != "I":
                raise ValueError(f"bad Pauli letter {ch!r}")
        return cls(len(letters), x, z, _TEXT_PHASE[sign] + n_y)

    # queries --------------------------------------------------------------

    @property
    def n_y(self) -> int:
        return _popcount(self.x_mask & self.z_mask)

    @property
    def support_mask(self) -> int:
        return self.x_mask | self.z_mask

    def support(self) -> list[int]:
        m = self.support_mask
        return [j for j in range(self.n_qubits) if (m >> j) & 1]

    @property
    def weight(self) -> int:
        return _popcount(self.support_mask)

    def letter(self, j: int) -> str:
        xb = (self.x_mask >> j) & 1
        zb = (self.z_mask >> j) & 1
        return "IZXY"[2 * xb + zb]

    @property
    def letter_phase(self) -> int:
        """Power of ``i`` in front of the letter-by-letter tensor product."""
        return (self.phase - self.n_y) % 4

    def to_text(self) -> str:
        letters = "".join(self.letter(j) for j in range(self.n_qubits))
        return _PHASE_TEXT[self.letter_phase] + letters

    def __str__(self) -> str:
        return self.to_text()

    def is_hermitian(self) -> bool:
        return self.letter_phase in (0, 2)

    def is_identity(self) -> bool:
        return self.x_mask == 0 and self.z_mask == 0 and self.phase == 0

    def equals_up_to_phase(self, other: "PauliString") -> bool:
        return (
            self.n_qubits == other.n_qubits
            and self.x_mask == other.x_mask
            and self.z_mask == other.z_mask
        )

    # algebra ---------------------------------------------------------------

    def _check(self, other: "PauliString"):
        if self.n_qubits != other.n_qubits:
            raise DimensionError(
                f"qubit counts differ: {self.n_qubits} vs {other.n_qubits}"
            )

    def __mul__(self, other: "PauliString") -> "PauliString":
        return multiply(self, other)

    def commutes(self, other: "PauliString") -> bool:
        return commutes(self, other)

    def with_phase(self, phase: int) -> "PauliString":
        return PauliString(self.n_qubits, self.x_mask, self.z_mask, phase)


def multiply(a: PauliString, b: PauliString) -> PauliString:
    """Operator product ``a @ b`` including the phase.

    Moving ``Z^{z_a}`` past ``X^{x_b}`` contributes ``(-1)^{|z_a & x_b|}``.
    """
    a._check(b)
    sign = 2 * parity(a.z_mask & b.x_mask)
    return PauliString(
        a.n_qubits, a.x_mask ^ b.x_mask, a.z_mask ^ b.z_mask, a.phase + b.phase + sign
    )


def product(ops: Sequence[PauliString], n_qubits: int | None = None) -> PauliString:
    """Ordered product of a sequence of strings (identity if empty)."""
    if not ops:
        if n_qubits is None:
            raise ValueError("n_qubits required for an empty product")
        return PauliString.identity(n_qubits)
    out = ops[0]
    for op in ops[1:]:
        out = multiply(out, op)
    return out


def commutes(a: PauliString, b: PauliString) -> bool:
    """True iff the symplectic form of ``a`` and ``b`` is even."""
    a._check(b)
    return parity((a.x_mask & b.z_mask) ^ (a.z_mask & b.x_mask)) == 0


def restrict(a: PauliString, omega: Sequence[int]) -> PauliString:
    """Tensor factor of ``a`` on the ordered qubit list ``omega``.

    Qubit ``omega[k]`` becomes qubit ``k`` of the result. The phase is
    dropped: the result is the plain letter product with phase +1.
    """
    x = z = 0
    for k, q in enumerate(omega):
        if not 0 <= q < a.n_qubits:
            raise IndexError(f"qubit {q} out of range")
        x |= ((a.x_mask >> q) & 1) << k
        z |= ((a.z_mask >> q) & 1) << k
    n_y = _popcount(x & z)
    return PauliString(len(omega), x, z, n_y)


def dense_matrix(a: PauliString, cap: int = DENSE_QUBIT_CAP) -> np.ndarray:
    """Dense ``2**n`` matrix in the computational basis.

    Basis index ``s`` has bit ``j`` equal to the Z eigenvalue label of qubit
    ``j`` (0 for +1). Only intended for oracle checks on small systems.
    """
    n = a.n_qubits
    if n > cap:
        raise DenseCapError(f"{n} qubits exceeds dense cap {cap}")
    dim = 1 << n
    s = np.arange(dim, dtype=np.int64)
    signs = 1 - 2 * (np.bitwise_count(s & a.z_mask).astype(np.int64) & 1)
    vals = (1j ** a.phase) * signs
    out = np.zeros((dim, dim), dtype=complex)
    out[s ^ a.x_mask, s] = vals
    return out


def matrix_element_signs(z_mask: int, states: np.ndarray) -> np.ndarray:
    """``(-1)^{|z & s|}`` for an array of uint64 basis states."""
    par = np.bitwise_count(states & np.uint64(z_mask)) & np.uint8(1)
    return 1.0 - 2.0 * par
