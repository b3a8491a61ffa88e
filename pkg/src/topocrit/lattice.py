"""Kitaev and color code lattices on cylinders (and Kitaev tori).

The horizontal direction is periodic with circumference ``D`` and the
vertical direction is open with height ``M`` (cylinder) or periodic
(torus, Kitaev families only). Qubits are indexed row-major by
(row, column, sublattice).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from itertools import combinations, product as iproduct
from typing import Sequence

from . import gf2
from .pauli import PauliString, commutes

KITAEV_FAMILIES = ("kitaev_square", "kitaev_triangular")
COLOR_FAMILIES = ("color_honeycomb", "color_square_octagonal")
FAMILIES = KITAEV_FAMILIES + COLOR_FAMILIES

_SHORT_NAMES = {
    "square": "kitaev_square",
    "triangular": "kitaev_triangular",
    "honeycomb": "color_honeycomb",
    "square_octagonal": "color_square_octagonal",
    "square-octagonal": "color_square_octagonal",
}


class LatticeError(ValueError):
    """Unsupported lattice parameters."""


def canonical_family(name: str) -> str:
    name = _SHORT_NAMES.get(name, name)
    if name not in FAMILIES:
        raise LatticeError(f"unknown family {name!r}")
    return name


@dataclass(frozen=True, eq=False)
class CodeLattice:
    """Geometry and stabilizer supports of one code instance.

    Attributes
    ----------
    family, boundary : str
    M, D : int
        Vertical and horizontal extent.
    coords : list of (float, float)
        Position of every qubit.
    plaquettes : list of tuple of int
        Z-type check supports (Kitaev) or plaquette supports (color, both types).
    plaquette_colors : list of int or None
        Color tag per plaquette for color codes.
    vertices : list of tuple of int or None
        X-type vertex supports (Kitaev only).
    nn_pairs : list of (int, int)
        Qubit pairs carrying the Ising perturbation.
    loops : dict
        Name -> (kind, ordered qubit path) for each non-trivial loop.
    x_check_coords : list of (float, float)
        Position of each X-type generator, i.e. of each effective spin.
    translation : list of int
        Qubit permutation implementing one horizontal period.
    n_translations : int
        Order of ``translation``.
    """

    family: str
    boundary: str
    M: int
    D: int
    coords: list
    plaquettes: list
    plaquette_colors: list | None
    vertices: list | None
    nn_pairs: list
    loops: dict
    x_check_coords: list
    translation: list
    n_translations: int
    qubit_labels: list = field(default_factory=list)

    @property
    def n_qubits(self) -> int:
        return len(self.coords)

    @property
    def is_kitaev(self) -> bool:
        return self.family in KITAEV_FAMILIES

    @property
    def n_plaquettes(self) -> int:
        return len(self.plaquettes)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices) if self.vertices is not None else 0

    @property
    def x_checks(self) -> list:
        """Supports of the X-type generators (the effective spins)."""
        return self.vertices if self.is_kitaev else self.plaquettes

    @property
    def z_checks(self) -> list:
        return self.plaquettes

    @cached_property
    def x_check_masks(self) -> list[int]:
        return [gf2.mask_from_indices(s) for s in self.x_checks]

    @cached_property
    def z_check_masks(self) -> list[int]:
        return [gf2.mask_from_indices(s) for s in self.z_checks]

    def x_stabilizers(self) -> list[PauliString]:
        return [PauliString(self.n_qubits, x_mask=m) for m in self.x_check_masks]

    def z_stabilizers(self) -> list[PauliString]:
        return [PauliString(self.n_qubits, z_mask=m) for m in self.z_check_masks]

    def stabilizers(self) -> list[PauliString]:
        return self.z_stabilizers() + self.x_stabilizers()

    def loop_operator(self, name: str) -> PauliString:
        kind, path = self.loops[name]
        return PauliString.from_support(self.n_qubits, path, kind)

    def nontrivial_loops(self) -> dict[str, PauliString]:
        return {name: self.loop_operator(name) for name in self.loops}

    @cached_property
    def x_dependencies(self) -> list[int]:
        """GF(2) relations among X generators, as masks over generator index."""
        return _relations(self.x_check_masks)

    @cached_property
    def z_dependencies(self) -> list[int]:
        return _relations(self.z_check_masks)

    @property
    def n_logical(self) -> int:
        n_indep = gf2.rank(self.x_check_masks) + gf2.rank(self.z_check_masks)
        return self.n_qubits - n_indep

    def membership_counts(self, kind: str = "X") -> list[int]:
        """Number of X (or Z) generators containing each qubit."""
        checks = self.x_checks if kind == "X" else self.z_checks
        counts = [0] * self.n_qubits
        for s in checks:
            for q in s:
                counts[q] += 1
        return counts

    def boundary_qubits(self) -> list[int]:
        """Qubits contained in fewer X generators than the bulk maximum."""
        counts = self.membership_counts("X")
        top = max(counts)
        return [q for q, c in enumerate(counts) if c < top]

    def translate_support(self, support: Sequence[int]) -> tuple[int, ...]:
        return tuple(sorted(self.translation[q] for q in support))

    def x_check_translation(self) -> list[int]:
        """Permutation of X generators induced by one horizontal period."""
        index = {tuple(sorted(s)): k for k, s in enumerate(self.x_checks)}
        return [index[self.translate_support(s)] for s in self.x_checks]

    def summary(self) -> str:
        return (
            f"{self.family} {self.boundary} M={self.M} D={self.D} "
            f"N={self.n_qubits} N_P={self.n_plaquettes} N_V={self.n_vertices}"
        )


def _relations(masks: Sequence[int]) -> list[int]:
    """Basis of subsets of ``masks`` whose product is the identity."""
    basis = gf2.EchelonBasis()
    rel = []
    for k, m in enumerate(masks):
        combo = basis.decompose(m)
        if combo is not None:
            rel.append(combo | (1 << k))
        basis.add(m)
    return rel


def _pairs_in_plaquettes(plaquettes, endpoints) -> list[tuple[int, int]]:
    """Qubit pairs that share a vertex and lie in a common plaquette."""
    out = set()
    for p in plaquettes:
        for a, b in combinations(sorted(p), 2):
            if set(endpoints[a]) & set(endpoints[b]):
                out.add((a, b))
    return sorted(out)


# --------------------------------------------------------------------------
# Kitaev code
# --------------------------------------------------------------------------


def build_kitaev(shape: str, M: int, D: int, boundary: str = "cylinder") -> CodeLattice:
    """Kitaev code with qubits on the edges of a square or triangular lattice.

    Parameters
    ----------
    shape : {'square', 'triangular'}
    M, D : int
        Number of vertex rows and columns.
    boundary : {'cylinder', 'torus'}
    """
    family = canonical_family(shape)
    if family not in KITAEV_FAMILIES:
        raise LatticeError(f"{shape!r} is not a Kitaev family")
    if boundary not in ("cylinder", "torus"):
        raise LatticeError(f"unknown boundary {boundary!r}")
    torus = boundary == "torus"
    if D < 3 or M < 2 or (torus and M < 3):
        raise LatticeError(f"unsupported size M={M}, D={D} for {boundary}")
    triangular = family == "kitaev_triangular"

    n_vrows = M if torus else M - 1
    index: dict[tuple, int] = {}
    coords: list[tuple[float, float]] = []
    labels: list[tuple] = []
    endpoints: list[tuple[tuple[int, int], tuple[int, int]]] = []

    def add(label, xy, ends):
        index[label] = len(coords)
        coords.append(xy)
        labels.append(label)
        endpoints.append(ends)

    for r in range(M):
        for c in range(D):
            add(("h", r, c), (c + 0.5, float(r)), ((r, c), (r, (c + 1) % D)))
            if r < n_vrows:
                add(("v", r, c), (float(c), r + 0.5), ((r, c), ((r + 1) % M, c)))
                if triangular:
                    add(
                        ("d", r, c),
                        (c + 0.5, r + 0.5),
                        ((r, c), ((r + 1) % M, (c + 1) % D)),
                    )

    vertex_sets: dict[tuple[int, int], list[int]] = {
        (r, c): [] for r in range(M) for c in range(D)
    }
    for q, ends in enumerate(endpoints):
        for v in ends:
            vertex_sets[v].append(q)
    vertices = [tuple(sorted(vertex_sets[(r, c)])) for r in range(M) for c in range(D)]
    vertex_coords = [(float(c), float(r)) for r in range(M) for c in range(D)]

    h = lambda r, c: index[("h", r % M, c % D)]
    v = lambda r, c: index[("v", r % M, c % D)]
    d = lambda r, c: index[("d", r % M, c % D)]

    plaquettes = []
    for r in range(n_vrows):
        for c in range(D):
            if triangular:
                plaquettes.append(tuple(sorted((h(r, c), v(r, c + 1), d(r, c)))))
                plaquettes.append(tuple(sorted((v(r, c), h(r + 1, c), d(r, c)))))
            else:
                plaquettes.append(
                    tuple(sorted((h(r, c), h(r + 1, c), v(r, c), v(r, c + 1))))
                )

    nn_pairs = _pairs_in_plaquettes(plaquettes, endpoints)

    loops: dict[str, tuple[str, tuple[int, ...]]] = {}
    if triangular:
        path = []
        for r in range(M):
            path.append(h(r, 0))
            if r < n_vrows:
                path.append(d(r, 0))
        loops["Lx_v"] = ("X", tuple(path))
    else:
        loops["Lx_v"] = ("X", tuple(h(r, 0) for r in range(M)))
    loops["Lz_h"] = ("Z", tuple(h(0, c) for c in range(D)))
    if torus:
        loops["Lz_v"] = ("Z", tuple(v(r, 0) for r in range(M)))
        if triangular:
            path = []
            for c in range(D):
                path += [v(0, c), d(0, c)]
            loops["Lx_h"] = ("X", tuple(path))
        else:
            loops["Lx_h"] = ("X", tuple(v(0, c) for c in range(D)))

    translation = [index[(lab[0], lab[1], (lab[2] + 1) % D)] for lab in labels]

    return CodeLattice(
        family=family,
        boundary=boundary,
        M=M,
        D=D,
        coords=coords,
        plaquettes=plaquettes,
        plaquette_colors=None,
        vertices=vertices,
        nn_pairs=nn_pairs,
        loops=loops,
        x_check_coords=vertex_coords,
        translation=translation,
        n_translations=D,
        qubit_labels=labels,
    )


# --------------------------------------------------------------------------
# color codes
# --------------------------------------------------------------------------


def build_color(shape: str, M: int, D: int) -> CodeLattice:
    """Color code on a honeycomb or square-octagonal cylinder.

    Parameters
    ----------
    shape : {'honeycomb', 'square_octagonal'}
    M : int
        Number of plaquette rows of the widest kind (hexagon rows per
        sublattice level pair for honeycomb, octagon rows otherwise).
    D : int
        Number of plaquette columns, must be even.
    """
    family = canonical_family(shape)
    if family not in COLOR_FAMILIES:
        raise LatticeError(f"{shape!r} is not a color-code family")
    if D % 2:
        raise LatticeError("color codes require even D")
    if family == "color_honeycomb":
        if M < 3 or D < 4:
            raise LatticeError("honeycomb requires M >= 3 and D >= 4")
        if M % 3:
            # the truncated strip only carries the two color-code logical
            # qubits when its hexagon levels close up in color
            raise LatticeError("honeycomb requires M divisible by 3")
        return _build_honeycomb(M, D)
    if M < 2 or D < 4:
        raise LatticeError("square-octagonal requires M >= 2 and D >= 4")
    return _build_square_octagonal(M, D)


def _finish_color(family, M, D, qubits, plaquette_list, loops, shift, period):
    """Common indexing for color lattices.

    ``qubits`` are integer (x, y) coordinates, ``plaquette_list`` holds
    (center, color, vertex coordinates) and ``shift`` is the horizontal
    displacement of one period on a circumference of ``period`` units.
    """
    qubits = sorted(qubits, key=lambda p: (p[1], p[0]))
    index = {q: k for k, q in enumerate(qubits)}
    plaquette_list = sorted(plaquette_list, key=lambda p: (p[0][1], p[0][0]))
    plaquettes = []
    colors = []
    centers = []
    for center, color, verts in plaquette_list:
        plaquettes.append(tuple(sorted(index[q] for q in verts if q in index)))
        colors.append(color)
        centers.append(center)
    loops_idx = {
        name: (kind, tuple(index[q] for q in path)) for name, (kind, path) in loops.items()
    }
    translation = [index[((x + shift) % period, y)] for (x, y) in qubits]

    # NN pairs: qubits joined by a lattice edge, i.e. consecutive around a face
    nn = set()
    for center, _, verts in plaquette_list:
        ring = sorted(
            verts,
            key=lambda q: _angle(q, center, period),
        )
        for a, b in zip(ring, ring[1:] + ring[:1]):
            if a in index and b in index:
                nn.add(tuple(sorted((index[a], index[b]))))

    return CodeLattice(
        family=family,
        boundary="cylinder",
        M=M,
        D=D,
        coords=[(float(x), float(y)) for (x, y) in qubits],
        plaquettes=plaquettes,
        plaquette_colors=colors,
        vertices=None,
        nn_pairs=sorted(nn),
        loops=loops_idx,
        x_check_coords=[(float(x), float(y)) for (x, y) in centers],
        translation=translation,
        n_translations=period // shift,
        qubit_labels=list(qubits),
    )


def _angle(q, center, period):
    import math

    dx = (q[0] - center[0] + period / 2) % period - period / 2
    return math.atan2(q[1] - center[1], dx)


def _build_honeycomb(M: int, D: int) -> CodeLattice:
    # doubled horizontal coordinate X in [0, 3D); level y in [0, 2K]
    K = M - 1
    period = 3 * D
    qubits = []
    for y in range(2 * K + 1):
        allowed = (2, 4) if y % 2 == 0 else (1, 5)
        qubits += [(x, y) for x in range(period) if x % 6 in allowed]
    qset = set(qubits)
    plaquettes = []
    for y in range(2 * K + 1):
        for col in range(D):
            if col % 2 != y % 2:
                continue
            cx = 3 * col
            verts = [((cx + dx) % period, y) for dx in (-2, 2)]
            verts += [((cx + dx) % period, y + dy) for dx in (-1, 1) for dy in (-1, 1)]
            plaquettes.append(((cx, y), y % 3, verts))

    bottom = [q for q in qubits if q[1] == 0]
    loops = {"Lx_h": ("X", bottom), "Lz_h": ("Z", bottom)}
    path = _vertical_color_path(qubits, plaquettes, period)
    loops["Lx_v"] = ("X", path)
    loops["Lz_v"] = ("Z", path)
    return _finish_color("color_honeycomb", M, D, qubits, plaquettes, loops, 6, period)


def _vertical_color_path(qubits, plaquettes, period):
    """Minimum-weight vertical logical supported in the leftmost column strip.

    The candidate window holds the qubits with doubled coordinate 1 or 2.
    A valid path overlaps every plaquette evenly and crosses the bottom row
    an odd number of times.
    """
    window = sorted((q for q in qubits if q[0] in (1, 2)), key=lambda q: q[1])
    best = None
    for bits in iproduct((0, 1), repeat=len(window)):
        chosen = {q for q, b in zip(window, bits) if b}
        if sum(1 for q in chosen if q[1] == 0) % 2 == 0:
            continue
        if any(len(chosen.intersection(v)) % 2 for _, _, v in plaquettes):
            continue
        key = (len(chosen), [1 - b for b in bits])
        if best is None or key < best[0]:
            best = (key, [q for q in window if q in chosen])
    if best is None:
        raise LatticeError("no vertical logical operator found")
    return best[1]


def _build_square_octagonal(M: int, D: int) -> CodeLattice:
    # coordinates scaled by 4: octagon (i, j) centered at (4i, 4j)
    period = 4 * D
    qubits = []
    for j in range(M):
        qubits += [(4 * i + 2, 4 * j - 1) for i in range(D)]
        qubits += [(4 * i + 2, 4 * j + 1) for i in range(D)]
        if j < M - 1:
            for i in range(D):
                qubits += [(4 * i + 1, 4 * j + 2), (4 * i + 3, 4 * j + 2)]
    qset = set(qubits)
    plaquettes = []
    for j in range(M):
        for i in range(D):
            cx, cy = 4 * i, 4 * j
            verts = [((cx + dx) % period, cy + dy) for dx in (-1, 1) for dy in (-2, 2)]
            verts += [((cx + dx) % period, cy + dy) for dx in (-2, 2) for dy in (-1, 1)]
            plaquettes.append(((cx, cy), 1 + (i + j) % 2, verts))
        if j < M - 1:
            for i in range(D):
                cx, cy = 4 * i + 2, 4 * j + 2
                verts = [(cx - 1, cy), (cx + 1, cy), (cx, cy - 1), (cx, cy + 1)]
                plaquettes.append(((cx, cy), 0, verts))

    bottom = [q for q in qubits if q[1] == -1]
    path = sorted((q for q in qubits if q[0] == 2), key=lambda q: q[1])
    loops = {
        "Lx_h": ("X", bottom),
        "Lz_h": ("Z", bottom),
        "Lx_v": ("X", path),
        "Lz_v": ("Z", path),
    }
    return _finish_color(
        "color_square_octagonal", M, D, qubits, plaquettes, loops, 4, period
    )


def build_lattice(family: str, M: int, D: int, boundary: str = "cylinder") -> CodeLattice:
    """Dispatch to the Kitaev or color builder by family name."""
    family = canonical_family(family)
    if family in KITAEV_FAMILIES:
        return build_kitaev(family, M, D, boundary)
    if boundary != "cylinder":
        raise LatticeError("torus mode is only available for Kitaev families")
    return build_color(family, M, D)


# --------------------------------------------------------------------------
# checks and dumps
# --------------------------------------------------------------------------


def all_stabilizers_commute(lattice: CodeLattice) -> bool:
    stabs = lattice.stabilizers()
    return all(commutes(a, b) for a, b in combinations(stabs, 2))


def loop_is_logical(lattice: CodeLattice, name: str) -> bool:
    """Loop commutes with every stabilizer and is not a product of them."""
    op = lattice.loop_operator(name)
    if not all(commutes(op, s) for s in lattice.stabilizers()):
        return False
    masks = lattice.x_check_masks if op.z_mask == 0 else lattice.z_check_masks
    target = op.x_mask if op.z_mask == 0 else op.z_mask
    return not gf2.EchelonBasis(masks).contains(target)


def dump_lattice(lattice: CodeLattice) -> str:
    """Plain-text listing of qubits, stabilizer supports and loops."""
    lines = [
        f"# family {lattice.family}",
        f"# boundary {lattice.boundary}",
        f"# M {lattice.M}",
        f"# D {lattice.D}",
        f"# N {lattice.n_qubits}",
        f"# N_P {lattice.n_plaquettes}",
        f"# N_V {lattice.n_vertices}",
        "[qubits]",
    ]
    for q, (x, y) in enumerate(lattice.coords):
        lines.append(f"{q} {x:g} {y:g}")
    lines.append("[plaquettes]")
    for k, p in enumerate(lattice.plaquettes):
        color = "" if lattice.plaquette_colors is None else f" c{lattice.plaquette_colors[k]}"
        lines.append(f"{k}{color} : " + " ".join(map(str, p)))
    if lattice.vertices is not None:
        lines.append("[vertices]")
        for k, v in enumerate(lattice.vertices):
            lines.append(f"{k} : " + " ".join(map(str, v)))
    lines.append("[nn_pairs]")
    for a, b in lattice.nn_pairs:
        lines.append(f"{a} {b}")
    lines.append("[loops]")
    for name, (kind, path) in lattice.loops.items():
        lines.append(f"{name} {kind} : " + " ".join(map(str, path)))
    return "\n".join(lines) + "\n"
