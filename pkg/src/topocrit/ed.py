"""Sparse exact diagonalization of Pauli-sum Hamiltonians.

States live in an affine GF(2) subspace of bitstrings ("sector basis"):
``state(idx) = offset ^ sum_k bit_k(idx) * gen_k``. A Pauli string whose
X part lies in the span of the generators then acts on indices by a fixed
XOR, which keeps matrix-free products simple and fast. The full Hilbert
space is the special case of unit-vector generators.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.linalg
import scipy.sparse.linalg as spla

from . import gf2, kernels
from .lattice import CodeLattice
from .pauli import PauliString, matrix_element_signs

DENSE_QUBIT_CAP = 13
DENSE_SOLVE_DIM = 1024
MAX_SPARSE_DIM = 1 << 28
DEFAULT_TOL = 1e-10
DEFAULT_MAXITER = 5000
FS_DELTA = 1e-3


class ConvergenceError(RuntimeError):
    """Iterative eigensolver failed to reach the residual tolerance."""


class DegeneracyError(RuntimeError):
    """Ground state is degenerate and no sector policy resolves it."""


class SectorError(ValueError):
    """Operator or basis incompatible with the requested sector."""


# --------------------------------------------------------------------------
# Hamiltonians and bases
# --------------------------------------------------------------------------


@dataclass
class SparseHamiltonian:
    """Real linear combination of Hermitian Pauli strings.

    Attributes
    ----------
    n_qubits : int
    terms : list of (float, PauliString)
    """

    n_qubits: int
    terms: list = field(default_factory=list)

    def add(self, coef: float, op: PauliString):
        if op.n_qubits != self.n_qubits:
            raise ValueError("term acts on the wrong number of qubits")
        if not op.is_hermitian():
            raise ValueError(f"term {op} is not Hermitian")
        self.terms.append((float(coef), op))

    @property
    def dimension(self) -> int:
        return 1 << self.n_qubits

    def x_groups(self) -> dict[int, list[tuple[complex, int]]]:
        """Terms grouped by X mask: mask -> [(coef * i**phase, z_mask)]."""
        groups: dict[int, list] = {}
        for c, op in self.terms:
            groups.setdefault(op.x_mask, []).append((c * (1j**op.phase), op.z_mask))
        return groups

    def is_real(self) -> bool:
        # i**phase (-1)^{z.s} is real iff phase is even
        return all(op.phase % 2 == 0 for _, op in self.terms)

    def offdiagonal_masks(self) -> list[int]:
        return sorted({op.x_mask for _, op in self.terms if op.x_mask})


class SectorBasis:
    """Affine GF(2) subspace ``offset + span(generators)`` of bitstrings.

    Parameters
    ----------
    n_qubits : int
    generators : sequence of int
        Linearly independent masks; bit ``k`` of a basis index selects
        ``generators[k]``.
    offset : int
    """

    def __init__(self, n_qubits: int, generators: Sequence[int], offset: int = 0):
        self.n_qubits = n_qubits
        self.generators = list(generators)
        self._echelon = gf2.EchelonBasis(self.generators)
        if self._echelon.rank != len(self.generators):
            raise ValueError("generators are not independent")
        self.offset = int(self._echelon.reduce(offset)[0])
        if len(self.generators) > 40:
            raise MemoryError("sector basis too large")
        self._states = None

    @classmethod
    def full(cls, n_qubits: int) -> "SectorBasis":
        return cls(n_qubits, [1 << j for j in range(n_qubits)], 0)

    @classmethod
    def orbit(cls, n_qubits: int, masks: Sequence[int], reference: int = 0) -> "SectorBasis":
        """States reachable from ``reference`` by products of ``masks``."""
        keep = gf2.independent_subset(list(masks))
        return cls(n_qubits, [masks[k] for k in keep], reference)

    @property
    def dim(self) -> int:
        return 1 << len(self.generators)

    @property
    def states(self) -> np.ndarray:
        if self._states is None:
            out = np.array([self.offset], dtype=np.uint64)
            for gmask in self.generators:
                out = np.concatenate([out, out ^ np.uint64(gmask)])
            self._states = out
        return self._states

    def index_mask(self, x_mask: int) -> int | None:
        """XOR applied to basis indices by ``X^x_mask``, or None if it leaves the basis."""
        return self._echelon.decompose(x_mask)

    def contains_state(self, s: int) -> bool:
        return self._echelon.contains(s ^ self.offset)

    def index_of(self, s: int) -> int:
        combo = self._echelon.decompose(s ^ self.offset)
        if combo is None:
            raise SectorError("state outside the basis")
        return combo

    def z_values(self, z_mask: int) -> np.ndarray:
        """Eigenvalue of ``Z^z_mask`` on every basis state."""
        return matrix_element_signs(z_mask, self.states)


class BasisOperator:
    """Matrix-free Hamiltonian restricted to a sector basis.

    The operator is ``diag + sum_g scalars[g] X^{c_g} + sum_h vectors[h] X^{d_h}``
    where ``X^c`` permutes basis indices by ``idx ^ c``; vector-valued groups
    hold ``f(source state)`` already permuted onto the target index.
    """

    def __init__(self, basis: SectorBasis, diag, scalar_groups=(), vector_groups=()):
        self.basis = basis
        self.diag = np.ascontiguousarray(diag)
        self.scalar_groups = list(scalar_groups)
        self.vector_groups = list(vector_groups)
        self.dtype = np.result_type(
            self.diag.dtype, *[np.asarray(v).dtype for _, v in self.vector_groups],
            *[np.asarray(a).dtype for _, a in self.scalar_groups], np.float64
        )
        self._cm = np.array([c for c, _ in self.scalar_groups], dtype=np.int64)
        self._cv = np.array([a for _, a in self.scalar_groups], dtype=self.dtype)
        self.shape = (basis.dim, basis.dim)

    @classmethod
    def from_hamiltonian(cls, H: SparseHamiltonian, basis: SectorBasis) -> "BasisOperator":
        states = basis.states
        dim = basis.dim
        real = H.is_real()
        diag = np.zeros(dim, dtype=float if real else complex)
        scalar_groups = []
        vector_groups = []
        idx = np.arange(dim, dtype=np.int64)
        for xm, items in sorted(H.x_groups().items()):
            f = np.zeros(dim, dtype=complex)
            for c, zm in items:
                f += c * matrix_element_signs(zm, states)
            if real:
                f = f.real
            if xm == 0:
                diag = diag + f
                continue
            cmask = basis.index_mask(xm)
            if cmask is None:
                raise SectorError(f"X mask {xm:#x} leaves the sector basis")
            if np.all(f == f[0]):
                scalar_groups.append((cmask, f[0]))
            else:
                vector_groups.append((cmask, f[idx ^ cmask]))
        return cls(basis, diag, scalar_groups, vector_groups)

    def matvec(self, x: np.ndarray) -> np.ndarray:
        x = np.ascontiguousarray(x, dtype=np.result_type(x, self.dtype))
        out = np.empty_like(x)
        if (
            kernels.BACKEND == "compiled"
            and x.dtype == np.float64
            and self.diag.dtype == np.float64
            and self._cv.dtype == np.float64
        ):
            kernels.xor_matvec(self.diag, self._cm, self._cv, x, out)
        else:
            kernels._fallback.xor_matvec(self.diag, self._cm, self._cv, x, out)
        if self.vector_groups:
            idx = np.arange(x.shape[0], dtype=np.int64)
            for c, g in self.vector_groups:
                out += g * x[idx ^ c]
        return out

    def to_dense(self) -> np.ndarray:
        dim = self.shape[0]
        out = np.zeros((dim, dim), dtype=self.dtype)
        idx = np.arange(dim)
        out[idx, idx] = self.diag
        for c, a in self.scalar_groups:
            out[idx ^ c, idx] += a
        for c, g in self.vector_groups:
            out[idx, idx ^ c] += g
        return out

    def linear_operator(self) -> spla.LinearOperator:
        return spla.LinearOperator(self.shape, matvec=self.matvec, dtype=self.dtype)


@dataclass
class EigenSolution:
    """Lowest eigenpairs with their residual norms."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    residuals: np.ndarray

    @property
    def ground_energy(self) -> float:
        return float(self.eigenvalues[0])

    @property
    def ground_state(self) -> np.ndarray:
        return self.eigenvectors[:, 0]


def _as_operator(H, basis=None):
    if isinstance(H, SparseHamiltonian):
        basis = basis if basis is not None else SectorBasis.full(H.n_qubits)
        return BasisOperator.from_hamiltonian(H, basis)
    return H


def ground_states(
    H,
    k: int = 1,
    tol: float = DEFAULT_TOL,
    seed: int = 0,
    maxiter: int = DEFAULT_MAXITER,
    basis: SectorBasis | None = None,
    v0: np.ndarray | None = None,
) -> EigenSolution:
    """Lowest ``k`` eigenpairs of a Hamiltonian.

    Parameters
    ----------
    H : SparseHamiltonian or operator with ``matvec``, ``shape``, ``dtype``
    k : int
    tol : float
        Required residual ``||Hv - Ev|| <= tol * max(1, |E|)``.
    seed : int
        Seed of the random start vector of the Lanczos iteration.
    basis : SectorBasis, optional
        Basis used when ``H`` is a SparseHamiltonian (full space by default).

    Raises
    ------
    ConvergenceError
        If the residual bound is not met.
    """
    op = _as_operator(H, basis)
    dim = op.shape[0]
    if k < 1 or k > dim:
        raise ValueError("k out of range")
    if dim > MAX_SPARSE_DIM:
        raise MemoryError(f"dimension {dim} above the solver cap")
    if dim <= DENSE_SOLVE_DIM or k >= dim - 1:
        mat = op.to_dense() if hasattr(op, "to_dense") else op.matvec(np.eye(dim))
        w, v = scipy.linalg.eigh(mat)
        w, v = w[:k], v[:, :k]
    else:
        if v0 is None:
            rng = np.random.default_rng(seed)
            v0 = rng.standard_normal(dim)
            if np.issubdtype(op.dtype, np.complexfloating):
                v0 = v0 + 1j * rng.standard_normal(dim)
        lin = spla.LinearOperator(op.shape, matvec=op.matvec, dtype=op.dtype)
        ncv = min(dim - 1, max(2 * k + 1, 24))
        try:
            w, v = spla.eigsh(
                lin, k=k, which="SA", v0=v0, tol=tol * 1e-3, maxiter=maxiter, ncv=ncv
            )
        except spla.ArpackNoConvergence as exc:
            raise ConvergenceError(f"Lanczos did not converge: {exc}") from exc
        order = np.argsort(w)
        w, v = w[order], v[:, order]
    res = np.array(
        [np.linalg.norm(op.matvec(v[:, j]) - w[j] * v[:, j]) for j in range(v.shape[1])]
    )
    bound = tol * np.maximum(1.0, np.abs(w))
    if np.any(res > bound):
        raise ConvergenceError(f"residuals {res} exceed tolerance {bound}")
    return EigenSolution(w, v, res)


def dense_matrix(H: SparseHamiltonian, cap: int = DENSE_QUBIT_CAP) -> np.ndarray:
    """Dense matrix of ``H`` in the full computational basis (oracle use)."""
    if H.n_qubits > cap:
        raise MemoryError(f"{H.n_qubits} qubits exceeds the dense cap {cap}")
    dim = 1 << H.n_qubits
    s = np.arange(dim, dtype=np.int64)
    out = np.zeros((dim, dim), dtype=float if H.is_real() else complex)
    for c, op in H.terms:
        signs = 1 - 2 * (np.bitwise_count(s & op.z_mask).astype(np.int64) & 1)
        vals = c * (1j**op.phase) * signs
        out[s ^ op.x_mask, s] += vals.real if H.is_real() else vals
    return out


def expectation(state: np.ndarray, op: PauliString, basis: SectorBasis) -> float:
    """``<state|op|state>`` for a state expressed in ``basis``."""
    if state.shape[0] != basis.dim:
        raise ValueError("state dimension does not match the basis")
    if op.n_qubits != basis.n_qubits:
        raise ValueError("operator acts on a different number of qubits")
    cmask = basis.index_mask(op.x_mask)
    if cmask is None:
        return 0.0
    signs = basis.z_values(op.z_mask)
    idx = np.arange(basis.dim, dtype=np.int64)
    val = (1j**op.phase) * np.vdot(state[idx ^ cmask], signs * state)
    return float(val.real)


# --------------------------------------------------------------------------
# perturbed code Hamiltonians
# --------------------------------------------------------------------------


def assemble(lattice: CodeLattice, g: float, lam: float) -> SparseHamiltonian:
    """Perturbed code Hamiltonian as an explicit Pauli sum.

    Kitaev: ``-sum Z_P - sum X_V - g sum Z_i - lam sum_<ij> Z_i Z_j``.
    Color: ``-sum Z_P - sum X_P - g sum Z_i`` (no Ising term).
    """
    if g < 0 or lam < 0:
        raise ValueError("g and lambda must be non-negative")
    if not lattice.is_kitaev and lam != 0:
        raise ValueError("color-code Hamiltonian carries no Ising term")
    n = lattice.n_qubits
    H = SparseHamiltonian(n)
    for op in lattice.z_stabilizers():
        H.add(-1.0, op)
    for op in lattice.x_stabilizers():
        H.add(-1.0, op)
    for q in range(n):
        H.add(-g, PauliString(n, z_mask=1 << q))
    if lattice.is_kitaev:
        for a, b in lattice.nn_pairs:
            H.add(-lam, PauliString(n, z_mask=(1 << a) | (1 << b)))
    return H


def sector_basis(lattice: CodeLattice, policy: str = "sector", reference: int = 0) -> SectorBasis:
    """Basis for the perturbed code Hamiltonian.

    ``policy='sector'`` keeps the states reachable from ``reference`` by the
    X generators; for the all-zero reference this is the sector where every
    Z check and every Z-type loop equals +1. ``policy='none'`` is the full
    Hilbert space.
    """
    n = lattice.n_qubits
    if policy == "none":
        return SectorBasis.full(n)
    if policy == "sector":
        return SectorBasis.orbit(n, lattice.x_check_masks, reference)
    raise ValueError(f"unknown sector policy {policy!r}")


class CodeHamiltonian:
    """Perturbed code Hamiltonian pre-assembled in a sector basis.

    The diagonal is stored in three parts so that sweeps over ``g`` and
    ``lam`` only rescale vectors:
    ``diag = d_stab + g * d_field + lam * d_ising``.
    """

    def __init__(self, lattice: CodeLattice, policy: str = "sector", reference: int = 0):
        self.lattice = lattice
        self.policy = policy
        self.basis = sector_basis(lattice, policy, reference)
        states = self.basis.states
        n = lattice.n_qubits
        self.d_stab = np.zeros(self.basis.dim)
        for zm in lattice.z_check_masks:
            self.d_stab -= matrix_element_signs(zm, states)
        pop = np.bitwise_count(states).astype(float)
        self.d_field = -(n - 2.0 * pop)
        self.d_ising = np.zeros(self.basis.dim)
        if lattice.is_kitaev:
            for a, b in lattice.nn_pairs:
                self.d_ising -= matrix_element_signs((1 << a) | (1 << b), states)
        self.groups = []
        for xm in lattice.x_check_masks:
            c = self.basis.index_mask(xm)
            if c is None:
                raise SectorError("X generator leaves the basis")
            self.groups.append((c, -1.0))

    def operator(self, g: float, lam: float = 0.0) -> BasisOperator:
        if not self.lattice.is_kitaev and lam != 0:
            raise ValueError("color-code Hamiltonian carries no Ising term")
        diag = self.d_stab + g * self.d_field + lam * self.d_ising
        return BasisOperator(self.basis, diag, self.groups)

    def ground_state(self, g: float, lam: float = 0.0, k: int = 1, seed: int = 0,
                     tol: float = DEFAULT_TOL) -> EigenSolution:
        return ground_states(self.operator(g, lam), k=k, tol=tol, seed=seed)


def _axis_params(axis: str, p: float, fixed_other: float) -> tuple[float, float]:
    if axis == "g":
        return p, fixed_other
    if axis in ("lambda", "lam", "l"):
        return fixed_other, p
    raise ValueError(f"unknown axis {axis!r}")


def resolved_ground_state(model: CodeHamiltonian, g: float, lam: float, seed: int = 0,
                          degeneracy_tol: float = 1e-8) -> np.ndarray:
    """Ground state with the degeneracy policy of ``model`` enforced."""
    if model.policy == "none":
        sol = model.ground_state(g, lam, k=2, seed=seed)
        if sol.eigenvalues[1] - sol.eigenvalues[0] < degeneracy_tol:
            raise DegeneracyError(
                f"degenerate ground state at g={g}, lambda={lam}; use a sector policy"
            )
        return sol.ground_state
    return model.ground_state(g, lam, seed=seed).ground_state


def fidelity(lattice_or_model, axis: str, p1: float, p2: float, fixed_other: float = 0.0,
             policy: str = "sector", seed: int = 0) -> float:
    """``|<psi0(p1)|psi0(p2)>|`` along one parameter axis."""
    if p1 < 0 or p2 < 0:
        raise ValueError("parameters must be non-negative")
    model = (
        lattice_or_model
        if isinstance(lattice_or_model, CodeHamiltonian)
        else CodeHamiltonian(lattice_or_model, policy)
    )
    a = resolved_ground_state(model, *_axis_params(axis, p1, fixed_other), seed=seed)
    b = resolved_ground_state(model, *_axis_params(axis, p2, fixed_other), seed=seed)
    return min(1.0, float(abs(np.vdot(a, b))))


def susceptibility_from_fidelity(f: float, delta: float) -> float:
    if f <= 0.0:
        raise FloatingPointError("fidelity vanished; susceptibility undefined")
    return max(0.0, -2.0 * math.log(min(f, 1.0)) / delta**2)


def fidelity_susceptibility(lattice_or_model, axis: str, p: float, delta: float = FS_DELTA,
                            fixed_other: float = 0.0, policy: str = "sector",
                            seed: int = 0) -> float:
    """``-2 log f(p - delta/2, p + delta/2) / delta**2``."""
    lo = max(0.0, p - delta / 2)
    f = fidelity(lattice_or_model, axis, lo, lo + delta, fixed_other, policy, seed)
    return susceptibility_from_fidelity(f, delta)


@dataclass
class SweepPoint:
    p: float
    value: float
    residual: float
    ok: bool = True
    message: str = ""


def fs_sweep(lattice: CodeLattice, axis: str, grid: Sequence[float], fixed_other: float = 0.0,
             delta: float = FS_DELTA, policy: str = "sector", seed: int = 0,
             model: CodeHamiltonian | None = None) -> list[SweepPoint]:
    """Fidelity susceptibility on a parameter grid (one point per entry)."""
    model = model or CodeHamiltonian(lattice, policy)
    out = []
    for p in grid:
        try:
            lo = max(0.0, p - delta / 2)
            sa = model.ground_state(*_axis_params(axis, lo, fixed_other), seed=seed)
            sb = model.ground_state(*_axis_params(axis, lo + delta, fixed_other), seed=seed)
            f = min(1.0, float(abs(np.vdot(sa.ground_state, sb.ground_state))))
            chi = susceptibility_from_fidelity(f, delta)
            out.append(SweepPoint(p, chi, float(max(sa.residuals[0], sb.residuals[0]))))
        except (ConvergenceError, FloatingPointError) as exc:
            out.append(SweepPoint(p, float("nan"), float("nan"), False, str(exc)))
    return out


# --------------------------------------------------------------------------
# sector-resolved spectra
# --------------------------------------------------------------------------


def coset_offsets(n_qubits: int, masks: Sequence[int]) -> list[int]:
    """One representative per coset of span(masks) in GF(2)^n."""
    basis = gf2.EchelonBasis(list(masks))
    pivots = set(basis._pivots)
    free = [j for j in range(n_qubits) if j not in pivots]
    return gf2.span_elements([1 << j for j in free])


def _coset_spectrum(lattice, g, lam, offset, k):
    model = CodeHamiltonian(lattice, "sector", reference=offset)
    op = model.operator(g, lam)
    if op.shape[0] <= 4096:
        w = scipy.linalg.eigvalsh(op.to_dense())
        return w[:k]
    return ground_states(op, k=k).eigenvalues


def lowest_levels(lattice: CodeLattice, g: float, lam: float, k: int = 2,
                  offsets: Sequence[int] | None = None) -> np.ndarray:
    """Lowest ``k`` eigenvalues over all symmetry sectors (or the given ones)."""
    if offsets is None:
        offsets = coset_offsets(lattice.n_qubits, lattice.x_check_masks)
    levels = []
    for off in offsets:
        levels.extend(_coset_spectrum(lattice, g, lam, off, k))
    return np.sort(np.asarray(levels))[:k]


def energy_gap(lattice: CodeLattice, axis: str, grid: Sequence[float],
               fixed_other: float = 0.0) -> list[SweepPoint]:
    """``E_1 - E_0`` over the full Hilbert space at every grid point."""
    offsets = coset_offsets(lattice.n_qubits, lattice.x_check_masks)
    out = []
    for p in grid:
        try:
            w = lowest_levels(lattice, *_axis_params(axis, p, fixed_other), k=2, offsets=offsets)
            out.append(SweepPoint(p, float(w[1] - w[0]), 0.0))
        except ConvergenceError as exc:
            out.append(SweepPoint(p, float("nan"), float("nan"), False, str(exc)))
    return out


def syndrome_offset(lattice: CodeLattice, flipped: Sequence[int] = ()) -> int:
    """A bitstring whose Z checks are -1 exactly on ``flipped``."""
    rhs = [1 if k in set(flipped) else 0 for k in range(lattice.n_plaquettes)]
    s = gf2.solve(lattice.z_check_masks, rhs)
    if s is None:
        raise SectorError("requested Z syndrome is not realizable")
    return s


def trivial_syndrome_offsets(lattice: CodeLattice) -> list[int]:
    """Coset representatives with every Z check equal to +1."""
    kernel = gf2.nullspace(lattice.z_check_masks, lattice.n_qubits)
    # cosets of span(X checks) inside the kernel of the Z checks
    reps = []
    basis = gf2.EchelonBasis(lattice.x_check_masks)
    for v in kernel:
        if basis.add(v):
            reps.append(v)
    return gf2.span_elements(reps)


def ground_space_dimension(lattice: CodeLattice, tol: float = 1e-10) -> int:
    """Degeneracy of the unperturbed code Hamiltonian.

    Only cosets with trivial Z syndrome can reach the bound
    ``-(number of stabilizer terms)``, so the count runs over those.
    """
    levels = []
    for off in trivial_syndrome_offsets(lattice):
        model = CodeHamiltonian(lattice, "sector", reference=off)
        w = scipy.linalg.eigvalsh(model.operator(0.0, 0.0).to_dense())
        levels.extend(w)
    levels = np.asarray(levels)
    return int(np.sum(levels < levels.min() + tol))


def dense_ground_space_dimension(lattice: CodeLattice, tol: float = 1e-10) -> int:
    """Kernel dimension of ``H_code - E_min`` from the full dense matrix."""
    H = assemble(lattice, 0.0, 0.0)
    w = scipy.linalg.eigvalsh(dense_matrix(H))
    n_terms = len(H.terms) - lattice.n_qubits - (len(lattice.nn_pairs) if lattice.is_kitaev else 0)
    return int(np.sum(np.abs(w + n_terms) < tol))


def flippable_plaquettes(lattice: CodeLattice) -> list[int]:
    """Z checks whose eigenvalue can be flipped alone (outside every relation)."""
    tied = 0
    for d in lattice.z_dependencies:
        tied |= d
    return [k for k in range(lattice.n_plaquettes) if not (tied >> k) & 1]


def plaquette_flip_gap(lattice: CodeLattice, plaquette: int | None = None, g: float = 0.0,
                       lam: float = 0.0) -> float:
    """Lowest energy with one Z check flipped minus the ground energy.

    By default the first check that can be flipped on its own is used.
    """
    if plaquette is None:
        choices = flippable_plaquettes(lattice)
        if not choices:
            raise SectorError("no Z check can be flipped alone")
        plaquette = choices[0]
    e0 = lowest_levels(lattice, g, lam, k=1, offsets=[0])[0]
    off = syndrome_offset(lattice, [plaquette])
    e1 = lowest_levels(lattice, g, lam, k=1, offsets=[off])[0]
    return float(e1 - e0)


def write_sweep_csv(path, rows, header_comments: Sequence[str] = ()):
    """CSV with columns (family, M, D, boundary, axis, p, value, residual, seed)."""
    cols = ("family", "M", "D", "boundary", "axis", "p", "value", "residual", "seed")
    with open(path, "w") as fh:
        for line in header_comments:
            fh.write(f"# {line}\n")
        fh.write(",".join(cols) + "\n")
        for r in rows:
            fh.write(
                f"{r['family']},{r['M']},{r['D']},{r['boundary']},{r['axis']},"
                f"{fmt12(r['p'])},{fmt12(r['value'])},{fmt12(r['residual'])},{r['seed']}\n"
            )


def fmt12(x: float) -> str:
    """Decimal with 12 significant digits."""
    return f"{float(x):.12g}"
