import math

import numpy as np
import pytest
import scipy.linalg
from scipy.stats import binom

from topocrit import kernels, qmc
from topocrit.effective import map_model
from topocrit.lattice import build_lattice
from topocrit.qmc import IsingModel, QmcConfig, UnsupportedModelError


def dense_tfim(model: IsingModel):
    """Dense H and the diagonal of sum_i s^z_i in the computational basis."""
    n = model.n_sites
    dim = 1 << n
    states = np.arange(dim)
    spins = 1 - 2 * ((states[:, None] >> np.arange(n)) & 1)
    diag = np.zeros(dim)
    for i, j, J in zip(model.bond_i, model.bond_j, model.bond_J):
        diag -= J * spins[:, i] * spins[:, j]
    H = np.diag(diag)
    for i in range(n):
        H[states, states ^ (1 << i)] -= model.gamma
    return H, spins.sum(axis=1)


def thermal(model, beta):
    H, mag = dense_tfim(model)
    w, v = scipy.linalg.eigh(H)
    rho_w = np.exp(-beta * (w - w[0]))
    rho_w /= rho_w.sum()
    probs = (v * v) @ rho_w  # diagonal of the density matrix
    n = model.n_sites
    return {
        "abs_m": probs @ np.abs(mag) / n,
        "m2": probs @ mag ** 2 / n ** 2,
        "m4": probs @ mag ** 4 / n ** 4,
        "energy": rho_w @ w,
    }


def test_chain_matches_thermal_ed():
    model = IsingModel.chain(8, 1.0, 1.0)
    est = qmc.run(model, QmcConfig(beta=32.0, n_therm=500, n_meas=20000, seed=3))
    ref = thermal(model, 32.0)
    assert abs(est.mean_abs_m - ref["abs_m"]) <= 3 * est.stderr
    assert abs(est.energy - ref["energy"]) <= 3 * est.energy_err


def test_two_spin_statistics():
    model = IsingModel(2, np.array([0]), np.array([1]), np.array([0.7]), 1.3)
    est = qmc.run(model, QmcConfig(beta=2.0, n_therm=500, n_meas=40000, seed=11))
    ref = thermal(model, 2.0)
    assert abs(est.mean_abs_m - ref["abs_m"]) <= 3 * est.stderr
    assert abs(est.energy - ref["energy"]) <= 3 * est.energy_err


def test_single_spin_energy():
    # H = -gamma s^x: <H> = -gamma tanh(beta gamma)
    model = IsingModel(1, np.zeros(0, np.int64), np.zeros(0, np.int64), np.zeros(0), 0.8)
    est = qmc.run(model, QmcConfig(beta=1.5, n_therm=200, n_meas=40000, seed=5))
    assert abs(est.energy + 0.8 * math.tanh(1.2)) <= 3 * est.energy_err
    assert est.mean_abs_m == 1.0 and est.m2 == 1.0


def test_zero_coupling_product_oracle():
    n = 12
    model = IsingModel(n, np.arange(n - 1), np.arange(1, n), np.zeros(n - 1), 1.0)
    k = np.arange(n + 1)
    # independent spins: each z-basis value is +-1 with probability 1/2
    ref = np.sum(binom.pmf(k, n, 0.5) * np.abs(2 * k - n)) / n
    est = qmc.run(model, QmcConfig(beta=4.0, n_therm=200, n_meas=20000, seed=9))
    assert abs(est.mean_abs_m - ref) <= 3 * est.stderr
    assert abs(est.signed_m) <= 3 * est.signed_m_err


def test_determinism_and_seed_dependence():
    model = IsingModel.chain(6)
    cfg = QmcConfig(beta=8.0, n_therm=50, n_meas=400, seed=21)
    a = qmc.run(model, cfg)
    b = qmc.run(model, cfg)
    assert a == b
    c = qmc.run(model, QmcConfig(beta=8.0, n_therm=50, n_meas=400, seed=22))
    assert c.mean_abs_m != a.mean_abs_m


def test_stderr_scales_with_sweeps():
    model = IsingModel.chain(8, 1.0, 1.2)
    errs = [qmc.run(model, QmcConfig(beta=8.0, n_therm=200, n_meas=n, seed=4)).stderr
            for n in (2000, 32000)]
    ratio = errs[0] / errs[1]
    assert 2.0 < ratio < 8.0  # about sqrt(16) = 4


@pytest.mark.skipif(not kernels.compiled_available(), reason="compiled kernels not built")
def test_compiled_matches_python():
    model = IsingModel.chain(5, 0.9, 1.1)
    cfg = QmcConfig(beta=6.0, n_therm=20, n_meas=200, seed=77)
    a = qmc.run(model, cfg, backend="compiled")
    b = qmc.run(model, cfg, backend="python")
    assert a == b


def test_binder_limits():
    assert qmc.binder_cumulant(1.0, 1.0) == pytest.approx(1.0)
    assert qmc.binder_cumulant(1.0, 3.0) == pytest.approx(0.0)
    assert qmc.binder_cumulant(0.0, 0.0) == 0.0


def test_binder_ordered_and_disordered():
    ordered = qmc.run(IsingModel.chain(16, 1.0, 0.3), QmcConfig(beta=64, n_therm=200, n_meas=2000, seed=1))
    disordered = qmc.run(IsingModel.chain(16, 1.0, 3.0), QmcConfig(beta=64, n_therm=200, n_meas=2000, seed=1))
    assert ordered.binder > 0.9
    assert disordered.binder < 0.3


def test_rejections():
    bad_j = IsingModel(2, np.array([0]), np.array([1]), np.array([-1.0]), 1.0)
    with pytest.raises(UnsupportedModelError):
        qmc.run(bad_j, QmcConfig(n_therm=1, n_meas=100))
    with pytest.raises(UnsupportedModelError):
        qmc.run(IsingModel.chain(4, 1.0, 0.0), QmcConfig(n_therm=1, n_meas=100))
    with pytest.raises(UnsupportedModelError):
        qmc.from_effective(map_model(build_lattice("color_honeycomb", 3, 4), 0.3))
    with pytest.raises(UnsupportedModelError):
        qmc.from_effective(map_model(build_lattice("kitaev_square", 2, 6), 0.0, 0.3))
    assert qmc.from_effective(map_model(build_lattice("kitaev_square", 2, 6), 0.0, 0.3),
                              allow_decoupled=True).n_sites == 12
    for cfg in (QmcConfig(beta=-1), QmcConfig(n_bins=5), QmcConfig(n_meas=0),
                QmcConfig(n_meas=15, n_bins=20)):
        with pytest.raises(ValueError):
            cfg.validate()


def test_effective_model_conversion():
    lat = build_lattice("kitaev_square", 2, 5)
    model = qmc.from_effective(map_model(lat, 0.3, 0.2))
    assert model.gamma == 1.0
    assert sorted(np.round(model.bond_J, 12)) == [0.3] * 15 + [0.4] * 10


def test_default_beta():
    assert qmc.default_beta(10) == 64.0
    assert qmc.default_beta(51) == 102.0
    lat = build_lattice("kitaev_square", 2, 5)
    est = qmc.run(map_model(lat, 0.3), QmcConfig(n_therm=5, n_meas=40))
    assert est.beta == 64.0


def test_sweep_seeds_and_beta_check():
    res = qmc.sweep(lambda p: IsingModel.chain(6, p, 1.0), [0.5, 1.0, 1.5],
                    QmcConfig(beta=8.0, n_therm=20, n_meas=200, seed=5))
    seeds = {r.estimate.seed for r in res.rows}
    assert len(seeds) == 3
    assert [c["p"] for c in res.beta_checks] == [0.5, 1.0, 1.5]
    assert all(c["beta"] == 8.0 for c in res.beta_checks)
    assert res.table().shape == (3, 4)
    with pytest.raises(ValueError):
        qmc.sweep(lambda p: IsingModel.chain(4), [], QmcConfig())


def test_sweep_records_failures():
    res = qmc.sweep(lambda p: IsingModel.chain(4, p, 1.0), [-1.0, 1.0],
                    QmcConfig(beta=4.0, n_therm=5, n_meas=40, seed=1), beta_check=False)
    assert not res.rows[0].ok and res.rows[1].ok


def test_derive_seed():
    assert qmc.derive_seed(1, 0) == qmc.derive_seed(1, 0)
    assert len({qmc.derive_seed(1, k) for k in range(100)}) == 100
    assert 0 <= qmc.derive_seed(2**63, 5) < 2**64
