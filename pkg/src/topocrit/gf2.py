"""Linear algebra over GF(2) with vectors stored as Python integer bitmasks.

Bit ``j`` of a mask is coordinate ``j``. Python integers are unbounded, so
the helpers work for any number of qubits.
"""

from __future__ import annotations

from typing import Iterable, Sequence


def parity(x: int) -> int:
    """Parity of the number of set bits."""
    return bin(x).count("1") & 1


def mask_from_indices(indices: Iterable[int]) -> int:
    m = 0
    for i in indices:
        m |= 1 << int(i)
    return m


def indices_from_mask(mask: int) -> list[int]:
    out = []
    j = 0
    while mask:
        if mask & 1:
            out.append(j)
        mask >>= 1
        j += 1
    return out


class EchelonBasis:
    """Incrementally built row-echelon basis of a GF(2) subspace.

    Each stored row carries a companion mask recording which input vectors
    were combined to produce it, so that membership queries can also return
    a decomposition.

    Parameters
    ----------
    vectors : sequence of int, optional
        Initial spanning vectors, inserted in order.
    """

    def __init__(self, vectors: Sequence[int] = ()):
        self._pivots: dict[int, tuple[int, int]] = {}
        self._n_inserted = 0
        for v in vectors:
            self.add(v)

    @property
    def rank(self) -> int:
        return len(self._pivots)

    def reduce(self, v: int) -> tuple[int, int]:
        """Reduce ``v`` against the basis.

        Returns
        -------
        residue, combo : int, int
            ``residue`` is zero iff ``v`` lies in the span. ``combo`` marks
            the input vectors whose sum equals ``v ^ residue``.
        """
        combo = 0
        residue = 0
        while v:
            top = v.bit_length() - 1
            row = self._pivots.get(top)
            if row is None:
                residue |= 1 << top
                v ^= 1 << top
            else:
                v ^= row[0]
                combo ^= row[1]
        return residue, combo

    def add(self, v: int) -> bool:
        """Insert ``v``; returns True if it increased the rank."""
        idx = self._n_inserted
        self._n_inserted += 1
        combo = 1 << idx
        while v:
            top = v.bit_length() - 1
            row = self._pivots.get(top)
            if row is None:
                self._pivots[top] = (v, combo)
                return True
            v ^= row[0]
            combo ^= row[1]
        return False

    def contains(self, v: int) -> bool:
        return self.reduce(v)[0] == 0

    def decompose(self, v: int) -> int | None:
        """Mask of inserted vectors summing to ``v``, or None if outside the span."""
        residue, combo = self.reduce(v)
        return combo if residue == 0 else None

    def rows(self) -> list[int]:
        """Basis rows sorted by pivot, highest pivot first."""
        return [self._pivots[k][0] for k in sorted(self._pivots, reverse=True)]


def rank(vectors: Iterable[int]) -> int:
    return EchelonBasis(list(vectors)).rank


def independent_subset(vectors: Sequence[int]) -> list[int]:
    """Indices of a maximal independent subset, greedily in input order."""
    basis = EchelonBasis()
    keep = []
    for i, v in enumerate(vectors):
        if basis.add(v):
            keep.append(i)
    return keep


def nullspace(rows: Sequence[int], n_cols: int) -> list[int]:
    """Basis of {v : parity(r & v) = 0 for every r in rows}.

    Parameters
    ----------
    rows : sequence of int
        Rows of the check matrix.
    n_cols : int
        Number of columns (bits) of the matrix.
    """
    # reduced row echelon form with explicit pivot columns
    reduced: list[int] = []
    pivots: list[int] = []
    for r in rows:
        for p, row in zip(pivots, reduced):
            if (r >> p) & 1:
                r ^= row
        if r == 0:
            continue
        p = (r & -r).bit_length() - 1
        for k in range(len(reduced)):
            if (reduced[k] >> p) & 1:
                reduced[k] ^= r
        reduced.append(r)
        pivots.append(p)
    pivot_set = set(pivots)
    out = []
    for free in range(n_cols):
        if free in pivot_set:
            continue
        v = 1 << free
        for p, row in zip(pivots, reduced):
            if (row >> free) & 1:
                v |= 1 << p
        out.append(v)
    return out


def span_elements(generators: Sequence[int]) -> list[int]:
    """All 2^k elements of the span of ``k`` independent generators."""
    out = [0]
    for g in generators:
        out = out + [x ^ g for x in out]
    return out


def solve(rows: Sequence[int], rhs: Sequence[int]) -> int | None:
    """Some ``v`` with ``parity(rows[k] & v) == rhs[k]`` for all k, or None."""
    # eliminate on augmented rows: bit -1 is emulated by a separate rhs list
    reduced: list[tuple[int, int, int]] = []  # (row, rhs, pivot)
    for r, b in zip(rows, rhs):
        b &= 1
        for row, rb, p in reduced:
            if (r >> p) & 1:
                r ^= row
                b ^= rb
        if r == 0:
            if b:
                return None
            continue
        p = (r & -r).bit_length() - 1
        reduced = [
            (row ^ r, rb ^ b, q) if (row >> p) & 1 else (row, rb, q)
            for row, rb, q in reduced
        ]
        reduced.append((r, b, p))
    v = 0
    for row, rb, p in reduced:
        if rb:
            v |= 1 << p
    return v
