# distutils: language = c++
# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels: XOR-indexed matvec, symmetric-basis construction and
products, and continuous-time cluster Monte Carlo.

The floating-point operation order matches ``_fallback.py``.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log
from libc.stdint cimport uint64_t, int64_t, int32_t
from libc.stdlib cimport llabs
from libcpp.vector cimport vector
from libcpp.pair cimport pair
from libcpp.algorithm cimport sort

cnp.import_array()

cdef double INV_2_53 = 1.0 / 9007199254740992.0


cdef inline uint64_t sm_next(uint64_t* state) noexcept nogil:
    state[0] += <uint64_t>0x9E3779B97F4A7C15
    cdef uint64_t z = state[0]
    z = (z ^ (z >> 30)) * <uint64_t>0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * <uint64_t>0x94D049BB133111EB
    return z ^ (z >> 31)


cdef inline double sm_uniform(uint64_t* state) noexcept nogil:
    return <double>((sm_next(state) >> 11) + 1) * INV_2_53


def splitmix_stream(uint64_t seed, Py_ssize_t count):
    """First ``count`` uniforms of the stream (for backend cross-checks)."""
    cdef uint64_t state = seed
    out = np.empty(count)
    cdef double[::1] o = out
    cdef Py_ssize_t k
    for k in range(count):
        o[k] = sm_uniform(&state)
    return out


# ---------------------------------------------------------------------------
# XOR-indexed matvec
# ---------------------------------------------------------------------------

def xor_matvec(const double[::1] diag, const int64_t[::1] cmasks,
               const double[::1] coefs, const double[::1] x, double[::1] out):
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t G = cmasks.shape[0]
    cdef Py_ssize_t i, g
    cdef double acc
    with nogil:
        for i in range(n):
            acc = diag[i] * x[i]
            for g in range(G):
                acc = acc + coefs[g] * x[i ^ cmasks[g]]
            out[i] = acc
    return np.asarray(out)


# ---------------------------------------------------------------------------
# translation x flip symmetric basis
# ---------------------------------------------------------------------------

cdef inline uint64_t apply_lut(const uint64_t[:, :, ::1] luts, Py_ssize_t t,
                               Py_ssize_t nbytes, uint64_t s) noexcept nogil:
    cdef uint64_t out = 0
    cdef Py_ssize_t b
    for b in range(nbytes):
        out |= luts[t, b, (s >> (8 * b)) & 255]
    return out


cdef inline uint64_t orbit_min(const uint64_t[:, :, ::1] luts, Py_ssize_t L,
                               Py_ssize_t nbytes, uint64_t flip, uint64_t s) noexcept nogil:
    cdef uint64_t best = s
    cdef uint64_t img
    cdef Py_ssize_t t
    if (s ^ flip) < best:
        best = s ^ flip
    for t in range(1, L):
        img = apply_lut(luts, t, nbytes, s)
        if img < best:
            best = img
        img = img ^ flip
        if img < best:
            best = img
    return best


cdef inline Py_ssize_t find_rep(const uint64_t[::1] reps, uint64_t s) noexcept nogil:
    cdef Py_ssize_t lo = 0
    cdef Py_ssize_t hi = reps.shape[0]
    cdef Py_ssize_t mid
    while lo < hi:
        mid = (lo + hi) >> 1
        if reps[mid] < s:
            lo = mid + 1
        else:
            hi = mid
    if lo < reps.shape[0] and reps[lo] == s:
        return lo
    return -1


def symmetric_representatives(int n_bits, const uint64_t[:, :, ::1] luts, uint64_t flip):
    cdef Py_ssize_t L = luts.shape[0]
    cdef Py_ssize_t nbytes = luts.shape[1]
    cdef uint64_t total = (<uint64_t>1) << n_bits
    cdef uint64_t s, img
    cdef Py_ssize_t t
    cdef bint ok
    cdef vector[uint64_t] reps
    with nogil:
        s = 0
        while s < total:
            ok = (s ^ flip) >= s
            if ok:
                for t in range(1, L):
                    img = apply_lut(luts, t, nbytes, s)
                    if img < s or (img ^ flip) < s:
                        ok = False
                        break
            if ok:
                reps.push_back(s)
            s += 1
    n = reps.size()
    rep_arr = np.empty(n, dtype=np.uint64)
    orbit = np.empty(n, dtype=np.int64)
    cdef uint64_t[::1] r = rep_arr
    cdef int64_t[::1] o = orbit
    cdef Py_ssize_t k
    cdef int64_t stab
    cdef int64_t group = L * (2 if flip else 1)
    with nogil:
        for k in range(<Py_ssize_t>n):
            s = reps[k]
            r[k] = s
            stab = 1
            if flip and (s ^ flip) == s:
                stab += 1
            for t in range(1, L):
                img = apply_lut(luts, t, nbytes, s)
                if img == s:
                    stab += 1
                if flip and (img ^ flip) == s:
                    stab += 1
            o[k] = group // stab
    return rep_arr, orbit


def symmetric_neighbors(const uint64_t[::1] reps, const uint64_t[:, :, ::1] luts,
                        uint64_t flip, masks):
    cdef Py_ssize_t L = luts.shape[0]
    cdef Py_ssize_t nbytes = luts.shape[1]
    cdef Py_ssize_t n = reps.shape[0]
    mask_arr = np.asarray(masks, dtype=np.uint64)
    cdef const uint64_t[::1] m = mask_arr
    cdef Py_ssize_t K = m.shape[0]
    table = np.empty((n, K), dtype=np.int32)
    cdef int32_t[:, ::1] tab = table
    cdef Py_ssize_t i, k, pos
    cdef bint bad = False
    with nogil:
        for i in range(n):
            for k in range(K):
                pos = find_rep(reps, orbit_min(luts, L, nbytes, flip, reps[i] ^ m[k]))
                if pos < 0:
                    bad = True
                tab[i, k] = <int32_t>pos
    if bad:
        raise RuntimeError("flip mask leaves the symmetric sector")
    return table


def symmetric_matvec(const double[::1] diag, const double[::1] sqrt_orbit,
                     const int32_t[:, ::1] table, double coef,
                     const double[::1] x, double[::1] out):
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t K = table.shape[1]
    cdef Py_ssize_t i, k
    cdef double acc
    z_arr = np.empty(n)
    cdef double[::1] z = z_arr
    with nogil:
        for i in range(n):
            z[i] = x[i] / sqrt_orbit[i]
        for i in range(n):
            acc = 0.0
            for k in range(K):
                acc = acc + z[table[i, k]]
            out[i] = diag[i] * x[i] + coef * sqrt_orbit[i] * acc
    return np.asarray(out)


def symmetric_flip_expectation(const double[::1] psi, const uint64_t[::1] reps,
                               const double[::1] sqrt_orbit,
                               const uint64_t[:, :, ::1] luts, uint64_t flip, masks):
    cdef Py_ssize_t L = luts.shape[0]
    cdef Py_ssize_t nbytes = luts.shape[1]
    cdef Py_ssize_t n = reps.shape[0]
    mask_arr = np.asarray(masks, dtype=np.uint64)
    cdef const uint64_t[::1] m = mask_arr
    cdef Py_ssize_t K = m.shape[0]
    cdef Py_ssize_t i, k, pos
    cdef double acc = 0.0
    cdef double part
    cdef bint bad = False
    with nogil:
        for k in range(K):
            part = 0.0
            for i in range(n):
                pos = find_rep(reps, orbit_min(luts, L, nbytes, flip, reps[i] ^ m[k]))
                if pos < 0:
                    bad = True
                    break
                part = part + psi[i] * sqrt_orbit[i] * (psi[pos] / sqrt_orbit[pos])
            acc = acc + part
    if bad:
        raise RuntimeError("flip mask leaves the symmetric sector")
    return acc / K


# ---------------------------------------------------------------------------
# continuous-time cluster Monte Carlo
# ---------------------------------------------------------------------------

cdef inline Py_ssize_t uf_find(vector[Py_ssize_t]& parent, Py_ssize_t a) noexcept nogil:
    while parent[a] != a:
        parent[a] = parent[parent[a]]
        a = parent[a]
    return a


def qmc_simulate(int n_sites, bond_i, bond_j, bond_J, double gamma, double beta,
                 long n_therm, long n_meas, uint64_t seed):
    cdef uint64_t state = seed
    bi_arr = np.ascontiguousarray(bond_i, dtype=np.int64)
    bj_arr = np.ascontiguousarray(bond_j, dtype=np.int64)
    bJ_arr = np.ascontiguousarray(bond_J, dtype=np.float64)
    cdef const int64_t[::1] bi = bi_arr
    cdef const int64_t[::1] bj = bj_arr
    cdef const double[::1] bJ = bJ_arr
    cdef Py_ssize_t n_bonds = bi.shape[0]

    names = ("abs_m", "m", "m2", "m4", "energy", "n_clusters", "n_segments")
    out = {name: np.zeros(n_meas) for name in names}
    cdef double[::1] o_abs = out["abs_m"]
    cdef double[::1] o_m = out["m"]
    cdef double[::1] o_m2 = out["m2"]
    cdef double[::1] o_m4 = out["m4"]
    cdef double[::1] o_e = out["energy"]
    cdef double[::1] o_nc = out["n_clusters"]
    cdef double[::1] o_ns = out["n_segments"]

    cdef vector[vector[double]] kinks = vector[vector[double]](n_sites)
    cdef vector[int] s0 = vector[int](n_sites, 1)
    cdef vector[vector[double]] cuts = vector[vector[double]](n_sites)
    cdef vector[vector[char]] flags = vector[vector[char]](n_sites)
    cdef vector[Py_ssize_t] seg_start = vector[Py_ssize_t](n_sites)
    cdef vector[int] segspin
    cdef vector[Py_ssize_t] parent
    cdef vector[int] decision
    cdef vector[double] newc
    cdef vector[pair[double, int]] events
    cdef vector[int] spins = vector[int](n_sites)

    cdef double N = <double>n_sites
    cdef long sweep, r
    cdef bint measure
    cdef Py_ssize_t i, j, k, b, a, c, nk, ni, nj, pi, pj, cur_i, cur_j, ra, rb, total, base, nc
    cdef long long M
    cdef double t, t_prev, dt, a_abs, a_m, a2, a4, ti, tj, t_next, ell, J
    cdef double bond_acc, diag_acc
    cdef long n_kinks, n_clusters
    cdef int spin, before

    with nogil:
        for sweep in range(n_therm + n_meas):
            measure = sweep >= n_therm
            if measure:
                events.clear()
                for i in range(n_sites):
                    for k in range(<Py_ssize_t>kinks[i].size()):
                        events.push_back(pair[double, int](kinks[i][k], <int>i))
                sort(events.begin(), events.end())
                M = 0
                for i in range(n_sites):
                    spins[i] = s0[i]
                    M += s0[i]
                t_prev = 0.0
                a_abs = 0.0
                a_m = 0.0
                a2 = 0.0
                a4 = 0.0
                for k in range(<Py_ssize_t>events.size()):
                    t = events[k].first
                    i = events[k].second
                    dt = t - t_prev
                    a_abs += <double>llabs(M) * dt
                    a_m += <double>M * dt
                    a2 += <double>(M * M) * dt
                    a4 += <double>(M * M * M * M) * dt
                    spins[i] = -spins[i]
                    M += 2 * spins[i]
                    t_prev = t
                dt = beta - t_prev
                a_abs += <double>llabs(M) * dt
                a_m += <double>M * dt
                a2 += <double>(M * M) * dt
                a4 += <double>(M * M * M * M) * dt
                n_kinks = events.size()

            segspin.clear()
            total = 0
            for i in range(n_sites):
                newc.clear()
                t = 0.0
                while True:
                    t += -log(sm_uniform(&state)) / gamma
                    if t >= beta:
                        break
                    newc.push_back(t)
                cuts[i].clear()
                flags[i].clear()
                a = 0
                b = 0
                nk = kinks[i].size()
                nc = newc.size()
                while a < nk or b < nc:
                    if b >= nc or (a < nk and kinks[i][a] <= newc[b]):
                        cuts[i].push_back(kinks[i][a])
                        flags[i].push_back(<char>1)
                        a += 1
                    else:
                        cuts[i].push_back(newc[b])
                        flags[i].push_back(<char>0)
                        b += 1
                seg_start[i] = total
                c = cuts[i].size()
                if c > 0:
                    spin = s0[i]
                    for k in range(c):
                        if flags[i][k]:
                            spin = -spin
                        segspin.push_back(spin)
                    total += c
                else:
                    segspin.push_back(s0[i])
                    total += 1

            parent.resize(total)
            for k in range(total):
                parent[k] = k

            diag_acc = 0.0
            for b in range(n_bonds):
                i = bi[b]
                j = bj[b]
                J = bJ[b]
                ni = cuts[i].size()
                nj = cuts[j].size()
                cur_i = seg_start[i] + (ni - 1 if ni > 0 else 0)
                cur_j = seg_start[j] + (nj - 1 if nj > 0 else 0)
                pi = 0
                pj = 0
                t_prev = 0.0
                bond_acc = 0.0
                while True:
                    ti = cuts[i][pi] if pi < ni else beta
                    tj = cuts[j][pj] if pj < nj else beta
                    t_next = ti if ti < tj else tj
                    ell = t_next - t_prev
                    if ell > 0.0:
                        if segspin[cur_i] == segspin[cur_j]:
                            bond_acc += ell
                            if sm_uniform(&state) > exp(-2.0 * J * ell):
                                ra = uf_find(parent, cur_i)
                                rb = uf_find(parent, cur_j)
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

            decision.assign(total, 0)
            n_clusters = 0
            for k in range(total):
                ra = uf_find(parent, k)
                if decision[ra] == 0:
                    n_clusters += 1
                    if sm_uniform(&state) < 0.5:
                        decision[ra] = 2
                    else:
                        decision[ra] = 1
                if decision[ra] == 2:
                    segspin[k] = -segspin[k]

            for i in range(n_sites):
                base = seg_start[i]
                c = cuts[i].size()
                kinks[i].clear()
                if c == 0:
                    s0[i] = segspin[base]
                    continue
                for k in range(c):
                    if k > 0:
                        before = segspin[base + k - 1]
                    else:
                        before = segspin[base + c - 1]
                    if before != segspin[base + k]:
                        kinks[i].push_back(cuts[i][k])
                s0[i] = segspin[base + c - 1]

            if measure:
                r = sweep - n_therm
                o_abs[r] = a_abs / (beta * N)
                o_m[r] = a_m / (beta * N)
                o_m2[r] = a2 / (beta * N * N)
                o_m4[r] = a4 / (beta * N * N * N * N)
                o_e[r] = -diag_acc / beta - <double>n_kinks / beta
                o_nc[r] = n_clusters
                o_ns[r] = total
    return out
