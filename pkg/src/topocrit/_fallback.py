"""Pure Python / numpy versions of the compiled kernels.

Every function mirrors the signature and floating-point operation order of
its counterpart in ``_core.pyx`` so that both backends agree, bit for bit
in the Monte Carlo case.
"""

from __future__ import annotations

import math

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
INV_2_53 = 1.0 / 9007199254740992.0


# --------------------------------------------------------------------------
# random numbers
# --------------------------------------------------------------------------


class SplitMix64:
    """Counter-based SplitMix64 stream (state advances by a fixed increment)."""

    name = "splitmix64"

    def __init__(self, seed: int):
        self.state = int(seed) & MASK64

    def next_u64(self) -> int:
        self.state = (self.state + GOLDEN) & MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
        return z ^ (z >> 31)

    def uniform(self) -> float:
        """Uniform double in (0, 1]."""
        return ((self.next_u64() >> 11) + 1) * INV_2_53


# --------------------------------------------------------------------------
# matrix-free products in XOR-indexed bases
# --------------------------------------------------------------------------


def xor_matvec(diag, cmasks, coefs, x, out):
    """``out[i] = diag[i] x[i] + sum_g coefs[g] x[i ^ cmasks[g]]``."""
    np.multiply(diag, x, out=out)
    idx = np.arange(x.shape[0], dtype=np.int64)
    for c, a in zip(cmasks, coefs):
        out += a * x[idx ^ int(c)]
    return out


# --------------------------------------------------------------------------
# translation- and flip-symmetric basis
# --------------------------------------------------------------------------


def apply_lut(lut, states):
    """Apply a bit permutation stored as byte lookup tables."""
    out = np.zeros_like(states)
    for b in range(lut.shape[0]):
        out |= lut[b][(states >> np.uint64(8 * b)) & np.uint64(255)]
    return out


def _orbit_min(states, luts, flip):
    flip = np.uint64(flip)
    best = np.minimum(states, states ^ flip)
    for t in range(1, luts.shape[0]):
        img = apply_lut(luts[t], states)
        np.minimum(best, img, out=best)
        np.minimum(best, img ^ flip, out=best)
    return best


def symmetric_representatives(n_bits, luts, flip):
    """Smallest element of every orbit of the translation x flip group.

    Returns
    -------
    reps : uint64 array, sorted
    orbit : int64 array
        Orbit sizes.
    """
    states = np.arange(1 << n_bits, dtype=np.uint64)
    best = _orbit_min(states, luts, flip)
    reps = states[best == states]
    L = luts.shape[0]
    stab = np.zeros(reps.shape[0], dtype=np.int64)
    f = np.uint64(flip)
    for t in range(L):
        img = reps if t == 0 else apply_lut(luts[t], reps)
        stab += img == reps
        if flip:
            stab += (img ^ f) == reps
    group = L * (2 if flip else 1)
    return reps, group // stab


def symmetric_neighbors(reps, luts, flip, masks):
    """Index of the representative of ``rep ^ mask`` for every mask."""
    table = np.empty((reps.shape[0], len(masks)), dtype=np.int32)
    for k, m in enumerate(masks):
        tgt = _orbit_min(reps ^ np.uint64(m), luts, flip)
        pos = np.searchsorted(reps, tgt)
        if np.any(pos >= reps.shape[0]) or np.any(reps[np.minimum(pos, reps.shape[0] - 1)] != tgt):
            raise RuntimeError("flip mask leaves the symmetric sector")
        table[:, k] = pos
    return table


def symmetric_matvec(diag, sqrt_orbit, table, coef, x, out):
    """Hamiltonian product in the symmetric basis.

    ``out = diag x + coef * sqrt(O) * sum_m (x / sqrt(O))[table[:, m]]``.
    """
    z = x / sqrt_orbit
    np.multiply(diag, x, out=out)
    out += coef * sqrt_orbit * z[table].sum(axis=1)
    return out


def symmetric_flip_expectation(psi, reps, sqrt_orbit, luts, flip, masks):
    """<psi| (1/K) sum_k X^{masks[k]} |psi> for a symmetric real state."""
    z = psi / sqrt_orbit
    acc = 0.0
    for m in masks:
        tgt = _orbit_min(reps ^ np.uint64(m), luts, flip)
        pos = np.searchsorted(reps, tgt)
        acc += float(np.dot(psi * sqrt_orbit, z[pos]))
    return acc / len(masks)


# --------------------------------------------------------------------------
# continuous-time cluster Monte Carlo for the transverse-field Ising model
# --------------------------------------------------------------------------


def qmc_simulate(n_sites, bond_i, bond_j, bond_J, gamma, beta, n_therm, n_meas, seed):
    """Swendsen-Wang cluster updates in continuous imaginary time.

    Model: ``H = -sum_b J_b s^z_i s^z_j - gamma sum_i s^x_i`` with J_b > 0.

    Returns
    -------
    dict of per-measurement-sweep arrays: ``abs_m``, ``m``, ``m2``, ``m4``,
    ``energy``, ``n_clusters``, ``n_segments``.
    """
    rng = SplitMix64(seed)
    n_bonds = len(bond_i)
    kinks = [[] for _ in range(n_sites)]
    s0 = [1] * n_sites
    out = {k: np.zeros(n_meas) for k in ("abs_m", "m", "m2", "m4", "energy", "n_clusters", "n_segments")}
    N = float(n_sites)

    for sweep in range(n_therm + n_meas):
        measure = sweep >= n_therm
        if measure:
            events = sorted((t, i) for i in range(n_sites) for t in kinks[i])
            spins = list(s0)
            M = sum(spins)
            t_prev = 0.0
            a_abs = a_m = a2 = a4 = 0.0
            for t, i in events:
                dt = t - t_prev
                a_abs += abs(M) * dt
                a_m += M * dt
                a2 += float(M * M) * dt
                a4 += float(M * M * M * M) * dt
                spins[i] = -spins[i]
                M += 2 * spins[i]
                t_prev = t
            dt = beta - t_prev
            a_abs += abs(M) * dt
            a_m += M * dt
            a2 += float(M * M) * dt
            a4 += float(M * M * M * M) * dt
            n_kinks = len(events)

        # cuts: existing kinks plus Poisson(gamma) decoration points
        cuts = []
        flags = []
        seg_start = []
        segspin = []
        total = 0
        for i in range(n_sites):
            new = []
            t = 0.0
            while True:
                t += -math.log(rng.uniform()) / gamma
                if t >= beta:
                    break
                new.append(t)
            ks = kinks[i]
            c = []
            f = []
            a = b = 0
            while a < len(ks) or b < len(new):
                if b >= len(new) or (a < len(ks) and ks[a] <= new[b]):
                    c.append(ks[a])
                    f.append(True)
                    a += 1
                else:
                    c.append(new[b])
                    f.append(False)
                    b += 1
            cuts.append(c)
            flags.append(f)
            seg_start.append(total)
            if c:
                spin = s0[i]
                for k in range(len(c)):
                    if f[k]:
                        spin = -spin
                    segspin.append(spin)
                total += len(c)
            else:
                segspin.append(s0[i])
                total += 1

        parent = list(range(total))

        def find(a):
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        diag_acc = 0.0
        for b in range(n_bonds):
            i = bond_i[b]
            j = bond_j[b]
            J = bond_J[b]
            ci = cuts[i]
            cj = cuts[j]
            ni = len(ci)
            nj = len(cj)
            cur_i = seg_start[i] + (ni - 1 if ni else 0)
            cur_j = seg_start[j] + (nj - 1 if nj else 0)
            pi = pj = 0
            t_prev = 0.0
            bond_acc = 0.0
            while True:
                ti = ci[pi] if pi < ni else beta
                tj = cj[pj] if pj < nj else beta
                t_next = ti if ti < tj else tj
                ell = t_next - t_prev
                if ell > 0.0:
                    if segspin[cur_i] == segspin[cur_j]:
                        bond_acc += ell
                        if rng.uniform() > math.exp(-2.0 * J * ell):
                            ra = find(cur_i)
                            rb = find(cur_j)
                            if ra != rb:
                                if ra < rb:
                                    parent[rb] = ra
                                else:
                                    parent[ra] = rb
                    else:
                        bond_acc -= ell
                if t_next >= beta:
                    break
                if ti <= tj:
                    cur_i = seg_start[i] + pi
                    pi += 1
                if tj <= ti:
                    cur_j = seg_start[j] + pj
                    pj += 1
                t_prev = t_next
            diag_acc += J * bond_acc

        decision = [0] * total
        n_clusters = 0
        for k in range(total):
            r = find(k)
            if decision[r] == 0:
                n_clusters += 1
                decision[r] = 2 if rng.uniform() < 0.5 else 1
            if decision[r] == 2:
                segspin[k] = -segspin[k]

        for i in range(n_sites):
            c = cuts[i]
            base = seg_start[i]
            nc = len(c)
            if nc == 0:
                s0[i] = segspin[base]
                kinks[i] = []
                continue
            new_k = []
            for k in range(nc):
                before = segspin[base + k - 1] if k > 0 else segspin[base + nc - 1]
                if before != segspin[base + k]:
                    new_k.append(c[k])
            kinks[i] = new_k
            s0[i] = segspin[base + nc - 1]

        if measure:
            r = sweep - n_therm
            out["abs_m"][r] = a_abs / (beta * N)
            out["m"][r] = a_m / (beta * N)
            out["m2"][r] = a2 / (beta * N * N)
            out["m4"][r] = a4 / (beta * N * N * N * N)
            out["energy"][r] = -diag_acc / beta - n_kinks / beta
            out["n_clusters"][r] = n_clusters
            out["n_segments"][r] = total
    return out
