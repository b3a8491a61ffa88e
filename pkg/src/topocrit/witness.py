"""Local entanglement witness on the vertical non-trivial loop.

The witness is ``W = 1/2 - prod_a (1 + S_a)/2`` for ``n`` commuting
stabilizers ``S_a`` whose restrictions to the loop qubits are
``X...X`` and ``Z_1 Z_a`` (a GHZ stabilizer set). ``S_1`` is built from
X-type generators and the others from Z-type generators.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from . import ed, gf2
from .lattice import CodeLattice
from .pauli import PauliString, dense_matrix, product, restrict

GENERAL_PATH_CAP = 16


class WitnessConstructionError(ValueError):
    """No stabilizer subset with the required reduced form was found."""


class ResolutionWarning(UserWarning):
    """Derivative grid too coarse to resolve a peak."""


@dataclass
class WitnessSet:
    """Stabilizer subset defining the witness.

    Attributes
    ----------
    omega : tuple of int
        Ordered loop qubits; ``omega[0]`` is qubit 1 of the reduced forms.
    stabilizers : list of PauliString
        ``S_1`` (X type) followed by ``S_2 .. S_n`` (Z type).
    x_combo : int
        X generators multiplied into ``S_1`` (bit k for generator k).
    z_combos : list of int
        Z checks multiplied into each ``S_a``, a >= 2.
    """

    omega: tuple
    stabilizers: list
    x_combo: int = 0
    z_combos: tuple = ()

    @property
    def n(self) -> int:
        return len(self.omega)

    @property
    def reduced(self) -> list[PauliString]:
        return [restrict(s, self.omega) for s in self.stabilizers]

    @property
    def s1(self) -> PauliString:
        return self.stabilizers[0]


def _solutions(targets_rows: list[int], target: int, cap: int = 1 << 16) -> list[int]:
    """All combos ``c`` (over candidate rows) with ``xor_k c_k rows[k] == target``."""
    basis = gf2.EchelonBasis(targets_rows)
    combo = basis.decompose(target)
    if combo is None:
        return []
    kernel = [r for r in _relations_of(targets_rows)]
    if len(kernel) > 16:
        kernel = kernel[:16]
    return [combo ^ k for k in gf2.span_elements(kernel)][:cap]


def _relations_of(rows: list[int]) -> list[int]:
    basis = gf2.EchelonBasis()
    out = []
    for k, r in enumerate(rows):
        c = basis.decompose(r)
        if c is not None:
            out.append(c | (1 << k))
        basis.add(r)
    return out


def _restrict_mask(mask: int, omega) -> int:
    return sum(((mask >> q) & 1) << k for k, q in enumerate(omega))


def _combine(masks: list[int], combo: int) -> int:
    out = 0
    for k in gf2.indices_from_mask(combo):
        out ^= masks[k]
    return out


def construct_witness_set(lattice: CodeLattice, loop: str = "Lx_v") -> WitnessSet:
    """Canonical witness stabilizers for an X-type vertical loop.

    Among the generators touching the loop, ``S_1`` is the product with the
    fewest X generators whose loop restriction is ``X`` on every loop qubit;
    each ``S_a`` is the fewest-checks Z product restricting to ``Z_1 Z_a``
    whose off-loop support avoids that of ``S_1`` (so the off-loop
    single-qubit factors commute).
    """
    if loop not in lattice.loops:
        raise WitnessConstructionError(f"lattice has no loop {loop!r}")
    kind, path = lattice.loops[loop]
    if kind != "X" or not loop.endswith("_v"):
        raise WitnessConstructionError("only the vertical X-type loop is supported")
    omega = tuple(path)
    n = len(omega)
    omask = gf2.mask_from_indices(omega)
    N = lattice.n_qubits

    xm = lattice.x_check_masks
    zm = lattice.z_check_masks
    xc = [k for k, m in enumerate(xm) if m & omask]
    zc = [k for k, m in enumerate(zm) if m & omask]

    full = (1 << n) - 1
    x_rows = [_restrict_mask(xm[k], omega) for k in xc]
    s1_opts = []
    for c in _solutions(x_rows, full):
        gens = [xc[j] for j in gf2.indices_from_mask(c)]
        mask = _combine(xm, gf2.mask_from_indices(gens))
        s1_opts.append((len(gens), bin(mask).count("1"), gens, mask))
    if not s1_opts:
        raise WitnessConstructionError("no X-generator product covers the loop")
    s1_opts.sort(key=lambda t: (t[0], t[1], t[2]))

    z_rows = [_restrict_mask(zm[k], omega) for k in zc]
    for _, _, gens, s1_mask in s1_opts:
        outside = s1_mask & ~omask
        stabs = [PauliString(N, x_mask=s1_mask)]
        combos = []
        ok = True
        for a in range(1, n):
            target = 1 | (1 << a)
            best = None
            for c in _solutions(z_rows, target):
                checks = [zc[j] for j in gf2.indices_from_mask(c)]
                mask = _combine(zm, gf2.mask_from_indices(checks))
                if mask & outside:
                    continue
                key = (len(checks), bin(mask).count("1"), checks)
                if best is None or key < best[0]:
                    best = (key, mask, gf2.mask_from_indices(checks))
            if best is None:
                ok = False
                break
            stabs.append(PauliString(N, z_mask=best[1]))
            combos.append(best[2])
        if ok:
            return WitnessSet(omega, stabs, gf2.mask_from_indices(gens), tuple(combos))
    raise WitnessConstructionError("no Z products with commuting off-loop factors")


# --------------------------------------------------------------------------
# conditions
# --------------------------------------------------------------------------


def pseudoincidence_matrix(reduced: list[PauliString]) -> np.ndarray:
    """Anticommutation pattern of single-qubit factors, rows = loop qubits.

    Columns run over stabilizer pairs, pairs containing the first stabilizer
    first: (1,2), (1,3), ..., (1,n), (2,3), ...
    """
    n_op = len(reduced)
    nq = reduced[0].n_qubits
    pairs = [(0, b) for b in range(1, n_op)]
    pairs += [(a, b) for a, b in combinations(range(1, n_op), 2)]
    out = np.zeros((nq, len(pairs)), dtype=np.uint8)
    for j, (a, b) in enumerate(pairs):
        A, B = reduced[a], reduced[b]
        anti = (A.x_mask & B.z_mask) ^ (A.z_mask & B.x_mask)
        for i in range(nq):
            out[i, j] = (anti >> i) & 1
    return out


def gf2_matrix_rank(mat: np.ndarray) -> int:
    rows = [int("".join(str(int(v)) for v in row[::-1]) or "0", 2) for row in mat]
    return gf2.rank(rows)


@dataclass
class ConditionReport:
    independent_commuting: bool
    reduced_independent_commuting: bool
    outside_commuting: bool
    pseudoincidence_rank: int
    rank_ok: bool
    reduced_form_ok: bool

    @property
    def all_ok(self) -> bool:
        return (
            self.independent_commuting
            and self.reduced_independent_commuting
            and self.outside_commuting
            and self.rank_ok
        )


def _independent(ops: list[PauliString]) -> bool:
    vecs = [(op.x_mask << op.n_qubits) | op.z_mask for op in ops]
    return gf2.rank(vecs) == len(ops)


def _mutually_commute(ops: list[PauliString]) -> bool:
    return all(a.commutes(b) for a, b in combinations(ops, 2))


def verify_conditions(ws: WitnessSet) -> ConditionReport:
    """Check the four witness conditions for a stabilizer subset."""
    S = ws.stabilizers
    red = ws.reduced
    c1 = _independent(S) and _mutually_commute(S)
    c2 = _independent(red) and _mutually_commute(red)
    outside = [q for q in range(S[0].n_qubits) if q not in set(ws.omega)]
    c3 = True
    for q in outside:
        singles = [restrict(s, [q]) for s in S]
        if not _mutually_commute(singles):
            c3 = False
            break
    M = pseudoincidence_matrix(red)
    r = gf2_matrix_rank(M)
    n = ws.n
    form = red[0].x_mask == (1 << n) - 1 and red[0].z_mask == 0
    for a in range(1, n):
        form = form and red[a].x_mask == 0 and red[a].z_mask == (1 | (1 << a))
    return ConditionReport(c1, c2, c3, r, r == n - 1, form)


def ghz_state(n: int) -> np.ndarray:
    psi = np.zeros(1 << n)
    psi[0] = psi[-1] = 1 / math.sqrt(2)
    return psi


def ghz_check(ws_or_reduced, tol: float = 1e-10) -> bool:
    """True iff the reduced operators have GHZ_n as their unique joint +1 state."""
    red = ws_or_reduced.reduced if isinstance(ws_or_reduced, WitnessSet) else ws_or_reduced
    n = red[0].n_qubits
    if n > 10:
        raise ValueError("GHZ oracle limited to 10 qubits")
    proj = np.eye(1 << n, dtype=complex)
    for op in red:
        proj = proj @ (np.eye(1 << n) + dense_matrix(op)) / 2
    w = np.linalg.eigvalsh((proj + proj.conj().T) / 2)
    if int(np.sum(w > 0.5)) != 1:
        return False
    psi = ghz_state(n)
    return abs(np.vdot(psi, proj @ psi) - 1.0) < tol


# --------------------------------------------------------------------------
# expectation values
# --------------------------------------------------------------------------


def witness_matrix(stabilizers: list[PauliString]) -> np.ndarray:
    """Dense ``W`` (oracle use)."""
    n = stabilizers[0].n_qubits
    dim = 1 << n
    proj = np.eye(dim, dtype=complex)
    for s in stabilizers:
        proj = proj @ (np.eye(dim) + dense_matrix(s, cap=14)) / 2
    return 0.5 * np.eye(dim) - proj


def subset_products(stabilizers: list[PauliString]) -> list[PauliString]:
    """All ``2**n`` ordered products of subsets of the stabilizers."""
    n = len(stabilizers)
    if n > GENERAL_PATH_CAP:
        raise ValueError(f"n={n} exceeds the expansion cap {GENERAL_PATH_CAP}")
    out = [PauliString.identity(stabilizers[0].n_qubits)]
    for s in stabilizers:
        out = out + [p * s for p in out]
    return out


def witness_expectation_general(state: np.ndarray, ws: WitnessSet,
                                basis: ed.SectorBasis | None = None) -> float:
    """``Tr(W rho)`` for a pure state by expanding the projector product."""
    basis = basis or ed.SectorBasis.full(ws.s1.n_qubits)
    acc = 0.0
    for p in subset_products(ws.stabilizers):
        acc += ed.expectation(state, p, basis)
    return 0.5 - acc / (1 << ws.n)


def witness_expectation(state: np.ndarray, ws: WitnessSet,
                        basis: ed.SectorBasis | None = None, fast: bool = True,
                        sector_tol: float = 1e-8) -> float:
    """Witness value ``w`` in a pure state.

    The fast path uses ``w = -<S_1>/2``, valid when every Z-type member has
    expectation +1; this is checked and a violation raises ``SectorError``.
    """
    basis = basis or ed.SectorBasis.full(ws.s1.n_qubits)
    if not fast:
        return witness_expectation_general(state, ws, basis)
    for s in ws.stabilizers[1:]:
        v = ed.expectation(state, s, basis)
        if abs(v - 1.0) > sector_tol:
            raise ed.SectorError(f"Z-type witness member has expectation {v}")
    return -0.5 * ed.expectation(state, ws.s1, basis)


def mapped_s1_mask(lattice: CodeLattice, ws: WitnessSet) -> int:
    """Effective-spin mask of the image of ``S_1``."""
    from .effective import map_operator

    return map_operator(lattice, ws.s1).x_mask


# --------------------------------------------------------------------------
# bounds and derivatives
# --------------------------------------------------------------------------


def _check_w(w: float):
    if not -0.5 - 1e-12 <= w <= 0.5 + 1e-12:
        raise ValueError(f"witness value {w} outside [-1/2, 1/2]")


def lower_bound_gm(w: float) -> float:
    """Geometric-measure bound ``(1 - sqrt(1 - 4 w^2)) / 2`` (0 for w >= 0)."""
    _check_w(w)
    if w >= 0:
        return 0.0
    return (1.0 - math.sqrt(max(0.0, 1.0 - 4.0 * w * w))) / 2.0


def lower_bound_negativity(w: float) -> float:
    """Negativity bound ``-2 w`` (0 for w >= 0)."""
    _check_w(w)
    return 0.0 if w >= 0 else -2.0 * w


def gm_objective(r: float, w: float) -> float:
    """Function whose maximum over ``r`` gives the geometric-measure bound."""
    if r < 0:
        return r * w + (1.0 - math.sqrt(1.0 + r * r)) / 2.0
    return r / 2.0 if w <= 0 else -math.inf


def witness_derivative(p, w, step: float | None = None, peak_points: int = 3) -> np.ndarray:
    """Finite-difference ``dw/dp`` on a uniform grid.

    Central differences inside, one-sided at the ends. A warning is issued
    when the largest value sits within ``peak_points`` of the grid edge or is
    resolved by fewer than ``peak_points`` samples on either side.
    """
    p = np.asarray(p, dtype=float)
    w = np.asarray(w, dtype=float)
    if p.shape != w.shape or p.size < 3:
        raise ValueError("need at least three matching samples")
    h = np.diff(p)
    if step is None:
        step = h[0]
    if not np.allclose(h, step, rtol=1e-6, atol=1e-12):
        raise ValueError("grid must be uniform")
    d = np.empty_like(w)
    d[1:-1] = (w[2:] - w[:-2]) / (2 * step)
    d[0] = (w[1] - w[0]) / step
    d[-1] = (w[-1] - w[-2]) / step
    k = int(np.argmax(np.abs(d)))
    if k < peak_points or k > d.size - 1 - peak_points:
        warnings.warn("derivative peak not resolved inside the grid", ResolutionWarning)
    return d
