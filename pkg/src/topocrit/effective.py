"""Mapping of perturbed codes onto transverse-field spin models.

Every X-type generator becomes an effective spin whose ``sigma^x`` is the
generator itself. A pure-Z perturbation term flips exactly the generators
it anticommutes with, so it becomes a ``sigma^z`` product on those spins.
Couplings are kept as exact integer combinations ``a*g + b*lam`` so that
closed-form comparisons are exact.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import ed, gf2, kernels
from .lattice import CodeLattice
from .pauli import PauliString, matrix_element_signs


class MappingError(ValueError):
    """Perturbation term with an unexpected anticommutation pattern."""


class DecompositionError(ValueError):
    """Operator is not a product of X-type generators."""


@dataclass
class EffectiveModel:
    """``H = -sum_S c_S prod_{k in S} sz_k - sum_k sx_k + offset``.

    Attributes
    ----------
    n_spins : int
    forms : dict
        Spin tuple -> (a, b) with coupling ``a*g + b*lam``.
    tags : dict
        Spin tuple -> 'bulk' or 'boundary'.
    g, lam : float
    offset : float
    """

    family: str
    boundary: str
    M: int
    D: int
    n_spins: int
    forms: dict
    tags: dict
    g: float
    lam: float
    offset: float
    spin_coords: list = field(default_factory=list)

    @property
    def transverse(self) -> list[tuple[int, float]]:
        return [(k, -1.0) for k in range(self.n_spins)]

    @property
    def couplings(self) -> list[tuple[tuple[int, ...], float]]:
        return [(s, a * self.g + b * self.lam) for s, (a, b) in sorted(self.forms.items())]

    @property
    def max_body(self) -> int:
        return max((len(s) for s in self.forms), default=0)

    def hamiltonian(self) -> ed.SparseHamiltonian:
        """The model as a Pauli sum (offset not included)."""
        n = self.n_spins
        H = ed.SparseHamiltonian(n)
        for s, c in self.couplings:
            if c != 0:
                H.add(-c, PauliString.from_support(n, s, "Z"))
        for k, c in self.transverse:
            H.add(c, PauliString(n, x_mask=1 << k))
        return H

    def diagonal(self, states: np.ndarray) -> np.ndarray:
        """Coupling energy of each spin configuration (bit set = spin down)."""
        out = np.zeros(states.shape[0])
        for s, c in self.couplings:
            if c == 0:
                continue
            out -= c * matrix_element_signs(gf2.mask_from_indices(s), states)
        return out

    def dump(self) -> str:
        lines = [
            f"# effective model {self.family} {self.boundary} M={self.M} D={self.D}",
            f"# g={self.g!r} lambda={self.lam!r}",
            f"n_spins {self.n_spins}",
            f"offset {self.offset!r}",
        ]
        for s, c in self.couplings:
            a, b = self.forms[s]
            lines.append(
                f"zz {' '.join(map(str, s))} : {c!r} ({a}g+{b}lambda) {self.tags[s]}"
            )
        for k, c in self.transverse:
            lines.append(f"x {k} : {c!r}")
        return "\n".join(lines) + "\n"


def flipped_generators(lattice: CodeLattice, z_mask: int) -> tuple[int, ...]:
    """X generators anticommuting with the Z string ``z_mask``."""
    return tuple(
        k for k, xm in enumerate(lattice.x_check_masks) if gf2.parity(xm & z_mask)
    )


def map_model(lattice: CodeLattice, g: float, lam: float = 0.0) -> EffectiveModel:
    """Effective transverse-field model of the Z-check-trivial sector."""
    if not lattice.is_kitaev and lam != 0:
        raise ValueError("color-code perturbation has no Ising term")
    if g < 0 or lam < 0:
        raise ValueError("g and lambda must be non-negative")
    terms = [((1 << q), (1, 0)) for q in range(lattice.n_qubits)]
    if lattice.is_kitaev:
        terms += [((1 << a) | (1 << b), (0, 1)) for a, b in lattice.nn_pairs]
    forms: dict[tuple[int, ...], tuple[int, int]] = {}
    for zm, (a, b) in terms:
        spins = flipped_generators(lattice, zm)
        if len(spins) < 2 or (not lattice.is_kitaev and len(spins) > 3):
            raise MappingError(
                f"term on qubits {gf2.indices_from_mask(zm)} flips generators {spins}"
            )
        fa, fb = forms.get(spins, (0, 0))
        forms[spins] = (fa + a, fb + b)
    n_spins = len(lattice.x_check_masks)
    return EffectiveModel(
        family=lattice.family,
        boundary=lattice.boundary,
        M=lattice.M,
        D=lattice.D,
        n_spins=n_spins,
        forms=forms,
        tags={s: _coupling_tag(lattice.family, s, f) for s, f in forms.items()},
        g=float(g),
        lam=float(lam),
        offset=-float(lattice.n_plaquettes),
        spin_coords=list(lattice.x_check_coords),
    )


def _coupling_tag(family: str, spins, form) -> str:
    if family == "kitaev_square":
        return "nn" if form[0] else "nnn"
    if family == "kitaev_triangular":
        return "boundary" if form[1] == 1 else "bulk"
    return "boundary" if len(spins) == 2 else "bulk"


def closed_form_couplings(lattice: CodeLattice) -> dict[tuple[int, ...], tuple[int, int]]:
    """Coupling forms written down from the vertex geometry of a Kitaev lattice.

    Square: ``g`` on horizontal/vertical vertex pairs, ``2 lam`` on both
    diagonals of every plaquette. Triangular: ``g + 2 lam`` on edges shared
    by two triangles, ``g + lam`` on edges of the open rows.
    """
    if not lattice.is_kitaev:
        raise ValueError("closed forms exist for Kitaev lattices only")
    M, D = lattice.M, lattice.D
    torus = lattice.boundary == "torus"
    n_rows = M if torus else M - 1
    vid = lambda r, c: (r % M) * D + (c % D)
    out: dict[tuple[int, ...], list[int]] = {}

    def bump(a, b, da, db):
        key = tuple(sorted((vid(*a), vid(*b))))
        cur = out.setdefault(key, [0, 0])
        cur[0] += da
        cur[1] += db

    for r in range(M):
        for c in range(D):
            bump((r, c), (r, c + 1), 1, 0)
    for r in range(n_rows):
        for c in range(D):
            bump((r, c), (r + 1, c), 1, 0)
    if lattice.family == "kitaev_square":
        for r in range(n_rows):
            for c in range(D):
                bump((r, c), (r + 1, c + 1), 0, 2)
                bump((r, c + 1), (r + 1, c), 0, 2)
    else:
        for r in range(n_rows):
            for c in range(D):
                bump((r, c), (r + 1, c + 1), 1, 0)
                # each triangle adds lam to its three edges
                for a, b in (((r, c), (r, c + 1)), ((r, c + 1), (r + 1, c + 1)),
                             ((r, c), (r + 1, c + 1))):
                    bump(a, b, 0, 1)
                for a, b in (((r, c), (r + 1, c)), ((r + 1, c), (r + 1, c + 1)),
                             ((r, c), (r + 1, c + 1))):
                    bump(a, b, 0, 1)
    return {k: tuple(v) for k, v in out.items()}


def map_operator(lattice: CodeLattice, op: PauliString) -> PauliString:
    """Effective image of a product of X-type generators.

    The decomposition is unique up to the generator relations; the image
    with the fewest spins (then the smallest mask) is returned.
    """
    if op.z_mask or op.phase:
        raise DecompositionError("operator is not a phase-free pure X string")
    basis = gf2.EchelonBasis(lattice.x_check_masks)
    combo = basis.decompose(op.x_mask)
    if combo is None:
        raise DecompositionError("operator is outside the X-generator group")
    options = [combo ^ r for r in gf2.span_elements(lattice.x_dependencies)]
    best = min(options, key=lambda m: (bin(m).count("1"), m))
    return PauliString(len(lattice.x_check_masks), x_mask=best)


@dataclass
class SpectrumReport:
    e_full: float
    e_effective: float
    offset: float
    s1_full: float | None
    s1_effective: float | None
    ok: bool
    message: str = ""


def spectrum_check(lattice: CodeLattice, g: float, lam: float = 0.0, tol: float = 1e-9,
                   operator: PauliString | None = None) -> SpectrumReport:
    """Compare ground energies (and one mapped X operator) of both models.

    The full model is solved in the sector reached from the all-zero state,
    where every Z check and Z-type loop equals +1.
    """
    model = map_model(lattice, g, lam)
    full = ed.CodeHamiltonian(lattice, "sector")
    sol = full.ground_state(g, lam)
    esol = ed.ground_states(model.hamiltonian())
    e_full = sol.ground_energy
    e_eff = esol.ground_energy + model.offset
    s1 = s1e = None
    ok = abs(e_full - e_eff) <= tol * max(1.0, abs(e_full))
    msg = f"E_full={e_full!r} E_eff+offset={e_eff!r}"
    if operator is not None:
        s1 = ed.expectation(sol.ground_state, operator, full.basis)
        mapped = map_operator(lattice, operator)
        s1e = ed.expectation(esol.ground_state, mapped, ed.SectorBasis.full(model.n_spins))
        ok = ok and abs(s1 - s1e) <= 10 * tol
        msg += f" <S>={s1!r} <S~>={s1e!r}"
    if not ok:
        diffs = [
            f"{s}: {c!r}" for s, c in model.couplings
        ]
        msg += "\ncouplings:\n" + "\n".join(diffs)
    return SpectrumReport(e_full, e_eff, model.offset, s1, s1e, ok, msg)


# --------------------------------------------------------------------------
# translation- and flip-reduced solver for the effective model
# --------------------------------------------------------------------------


def permutation_luts(perm: list[int], n_powers: int) -> np.ndarray:
    """Byte lookup tables for ``perm**t``, t = 0..n_powers-1.

    ``luts[t, b, v]`` is the image of byte value ``v`` at byte position ``b``.
    """
    n = len(perm)
    nbytes = (n + 7) // 8
    luts = np.zeros((n_powers, nbytes, 256), dtype=np.uint64)
    cur = list(range(n))
    values = np.arange(256)
    for t in range(n_powers):
        for b in range(nbytes):
            acc = np.zeros(256, dtype=np.uint64)
            for j in range(8):
                src = 8 * b + j
                if src >= n:
                    break
                hit = ((values >> j) & 1).astype(bool)
                acc[hit] |= np.uint64(1) << np.uint64(cur[src])
            luts[t, b] = acc
        cur = [perm[k] for k in cur]
    return luts


class SymmetricEffectiveSolver:
    """Ground state of an effective model in the symmetric sector.

    The sector is translation momentum zero and even under the spin flip
    given by the generator relation. For a ferromagnetic model with a
    positive transverse field the ground state lives there.

    Parameters
    ----------
    lattice : CodeLattice
    """

    def __init__(self, lattice: CodeLattice):
        self.lattice = lattice
        deps = lattice.x_dependencies
        if len(deps) > 1:
            raise ValueError("more than one generator relation is not supported")
        self.flip = int(deps[0]) if deps else 0
        self.perm = lattice.x_check_translation()
        self.n_spins = len(self.perm)
        if self.n_spins > 40:
            raise MemoryError("too many effective spins")
        self.luts = permutation_luts(self.perm, lattice.n_translations)
        self.reps, orbit = kernels.symmetric_representatives(self.n_spins, self.luts, np.uint64(self.flip))
        self.sqrt_orbit = np.sqrt(orbit.astype(float))
        masks = np.array([1 << k for k in range(self.n_spins)], dtype=np.uint64)
        self.table = kernels.symmetric_neighbors(self.reps, self.luts, np.uint64(self.flip), masks)
        self._forms = None
        self._diag_parts = None

    @property
    def dim(self) -> int:
        return int(self.reps.shape[0])

    def _parts(self, model: EffectiveModel):
        if self._diag_parts is None or self._forms != model.forms:
            dg = np.zeros(self.dim)
            dl = np.zeros(self.dim)
            for s, (a, b) in model.forms.items():
                signs = matrix_element_signs(gf2.mask_from_indices(s), self.reps)
                if a:
                    dg -= a * signs
                if b:
                    dl -= b * signs
            self._diag_parts = (dg, dl)
            self._forms = dict(model.forms)
        return self._diag_parts

    def operator(self, g: float, lam: float = 0.0) -> "_SymmetricOperator":
        model = map_model(self.lattice, g, lam)
        dg, dl = self._parts(model)
        return _SymmetricOperator(self, g * dg + lam * dl)

    def ground_state(self, g: float, lam: float = 0.0, seed: int = 0,
                     tol: float = ed.DEFAULT_TOL) -> ed.EigenSolution:
        return ed.ground_states(self.operator(g, lam), tol=tol, seed=seed)

    def x_expectation(self, psi: np.ndarray, mask: int) -> float:
        """Translation average of ``<prod_{k in mask} sx_k>``."""
        masks = []
        m = mask
        for _ in range(self.lattice.n_translations):
            masks.append(m)
            m = gf2.mask_from_indices(self.perm[k] for k in gf2.indices_from_mask(m))
        arr = np.array(masks, dtype=np.uint64)
        return float(
            kernels.symmetric_flip_expectation(
                np.ascontiguousarray(psi), self.reps, self.sqrt_orbit, self.luts,
                np.uint64(self.flip), arr
            )
        )


class _SymmetricOperator:
    def __init__(self, solver: SymmetricEffectiveSolver, diag: np.ndarray):
        self.solver = solver
        self.diag = np.ascontiguousarray(diag)
        self.shape = (solver.dim, solver.dim)
        self.dtype = np.dtype(float)

    def matvec(self, x):
        s = self.solver
        x = np.ascontiguousarray(x, dtype=float)
        out = np.empty_like(x)
        kernels.symmetric_matvec(self.diag, s.sqrt_orbit, s.table, -1.0, x, out)
        return out

    def to_dense(self):
        return np.column_stack([self.matvec(e) for e in np.eye(self.shape[0])])
