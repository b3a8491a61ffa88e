import numpy as np
import pytest

from topocrit import _fallback, kernels
from topocrit.effective import SymmetricEffectiveSolver, permutation_luts
from topocrit.lattice import build_lattice

needs_core = pytest.mark.skipif(not kernels.compiled_available(),
                                reason="compiled kernels not built")


def test_splitmix64_reference_values():
    rng = _fallback.SplitMix64(0)
    assert rng.next_u64() == 0xE220A8397B1DCDAF
    assert rng.next_u64() == 0x6E789E6AA1B965F4
    u = [_fallback.SplitMix64(s).uniform() for s in range(1000)]
    assert 0 < min(u) and max(u) <= 1


def test_backend_selection():
    assert kernels.BACKEND in ("compiled", "python")
    assert kernels.backend("python") is _fallback
    with pytest.raises(ValueError):
        kernels.backend("fortran")


def symmetric_inputs(D=7):
    lat = build_lattice("kitaev_square", 2, D)
    perm = lat.x_check_translation()
    luts = permutation_luts(perm, lat.n_translations)
    flip = np.uint64(lat.x_dependencies[0])
    masks = np.array([1 << k for k in range(len(perm))], dtype=np.uint64)
    return len(perm), luts, flip, masks


def test_permutation_luts_apply():
    n, luts, _, _ = symmetric_inputs(5)
    states = np.arange(1 << n, dtype=np.uint64)
    once = _fallback.apply_lut(luts[1], states)
    assert sorted(once.tolist()) == states.tolist()  # a bijection
    twice = _fallback.apply_lut(luts[1], once)
    np.testing.assert_array_equal(twice, _fallback.apply_lut(luts[2], states))


def test_orbit_sizes_sum_to_sector_dimension():
    n, luts, flip, _ = symmetric_inputs(5)
    reps, orbit = _fallback.symmetric_representatives(n, luts, flip)
    assert orbit.sum() == 1 << n


@needs_core
def test_symmetric_kernels_agree():
    core = kernels.backend("compiled")
    n, luts, flip, masks = symmetric_inputs(7)
    r_py, o_py = _fallback.symmetric_representatives(n, luts, flip)
    r_c, o_c = core.symmetric_representatives(n, luts, flip)
    np.testing.assert_array_equal(r_py, r_c)
    np.testing.assert_array_equal(o_py, o_c)
    t_py = _fallback.symmetric_neighbors(r_py, luts, flip, masks)
    t_c = core.symmetric_neighbors(r_c, luts, flip, masks)
    np.testing.assert_array_equal(t_py, t_c)
    rng = np.random.default_rng(0)
    sq = np.sqrt(o_py.astype(float))
    diag = rng.normal(size=r_py.size)
    x = rng.normal(size=r_py.size)
    a = _fallback.symmetric_matvec(diag, sq, t_py, -1.0, x, np.empty_like(x))
    b = core.symmetric_matvec(diag, sq, t_c, -1.0, x, np.empty_like(x))
    np.testing.assert_allclose(a, b, rtol=1e-13, atol=1e-13)
    psi = x / np.linalg.norm(x)
    e_py = _fallback.symmetric_flip_expectation(psi, r_py, sq, luts, flip, masks[:3])
    e_c = core.symmetric_flip_expectation(psi, r_c, sq, luts, flip, masks[:3])
    assert e_py == pytest.approx(e_c, abs=1e-13)


@needs_core
def test_xor_matvec_agrees():
    core = kernels.backend("compiled")
    rng = np.random.default_rng(1)
    dim = 1 << 10
    diag = rng.normal(size=dim)
    cm = rng.integers(1, dim, size=12).astype(np.int64)
    co = rng.normal(size=12)
    x = rng.normal(size=dim)
    a = _fallback.xor_matvec(diag, cm, co, x, np.empty(dim))
    b = core.xor_matvec(diag, cm, co, x, np.empty(dim))
    np.testing.assert_allclose(a, b, rtol=1e-13, atol=1e-13)
    dense = np.diag(diag)
    for c, v in zip(cm, co):
        dense[np.arange(dim), np.arange(dim) ^ c] += v
    np.testing.assert_allclose(a, dense @ x, atol=1e-12)


@needs_core
def test_qmc_kernel_bitwise():
    core = kernels.backend("compiled")
    args = (6, np.arange(6, dtype=np.int64), (np.arange(6, dtype=np.int64) + 1) % 6,
            np.linspace(0.5, 1.5, 6), 1.1, 5.0, 10, 60, 123)
    a = _fallback.qmc_simulate(*args)
    b = core.qmc_simulate(*args)
    for key in a:
        np.testing.assert_array_equal(a[key], b[key])


def test_solver_uses_selected_backend():
    lat = build_lattice("kitaev_square", 2, 5)
    solver = SymmetricEffectiveSolver(lat)
    assert solver.dim > 0
