import json
import math

import numpy as np
import pytest

from topocrit import scaling
from topocrit.scaling import (
    ScalingDataset,
    ScalingError,
    Series,
    bounded_minimize,
    collapse_fs,
    collapse_m,
    collapse_witness,
    fit_asymptote,
    fit_log_divergence,
    fit_phase_boundary,
    fit_power_law,
    peak_location,
    polynomial_residual,
)

SIZES = (3, 5, 7, 9)


def p_max(D):
    return 0.5 + 0.3 * D ** -1.5


def fs_dataset(nu, sizes=SIZES, half_width=12, step=0.004):
    series = []
    for D in sizes:
        pm = p_max(D)
        p = pm + step * np.arange(-half_width, half_width + 1)
        x = D ** nu * (p - pm)
        chi = 3.0 * D ** 2 / (1.0 + x ** 2 + 0.1 * x ** 4)
        series.append(Series(D, p, chi))
    return ScalingDataset(series)


def witness_dataset(nu, sizes=SIZES, step=0.002):
    series = []
    for D in sizes:
        pm = p_max(D)
        xmax = 1.5
        half = int(xmax / (D ** (1 / nu) * step))
        p = pm + step * np.arange(-half, half + 1)
        x = D ** (1 / nu) * (p - pm)
        d = 1.09 * math.log(D) + 0.2 + np.log(1.0 - 0.3 * x ** 2)
        series.append(Series(D, p, d))
    return ScalingDataset(series)


def m_dataset(nu, beta, pc=0.5, sizes=(39, 51, 63, 75)):
    p = np.linspace(0.47, 0.53, 13)
    series = []
    for D in sizes:
        x = D ** (1 / nu) * (p - pc)
        m = D ** (-beta / nu) * (0.8 + 0.1 * x + 0.01 * x ** 2)
        series.append(Series(D, p, m, np.full(p.size, 1e-3)))
    return ScalingDataset(series)


def test_peak_location():
    p = np.linspace(0, 1, 11)
    v = -(p - 0.43) ** 2
    assert peak_location(p, v)[0] == pytest.approx(0.43, abs=1e-12)
    with pytest.raises(ScalingError):
        peak_location(p, p)
    with pytest.raises(ScalingError):
        peak_location(p, -p)


def test_polynomial_residual_exact_family():
    x = np.linspace(-2, 3, 40)
    assert polynomial_residual(x, 1 + x - 0.5 * x ** 8) < 1e-20
    assert polynomial_residual(x, np.sign(x)) > 1e-3
    with pytest.raises(ScalingError):
        polynomial_residual(x[:9], x[:9])


@pytest.mark.parametrize("nu", [0.7, 0.8, 0.95])
def test_fs_round_trip(nu):
    res = collapse_fs(fs_dataset(nu))
    assert res.nu == pytest.approx(nu, abs=1e-4)
    assert res.residual < 1e-12
    for D in SIZES:
        assert res.peaks[D] == pytest.approx(p_max(D), abs=1e-12)
        assert res.peak_values[D] == pytest.approx(3.0 * D ** 2, rel=1e-12)
    assert res.p_c == pytest.approx(0.5, abs=1e-6)
    assert res.delta == pytest.approx(1.5, abs=1e-4)


def test_fs_optimum_beats_random_samples(rng):
    data = fs_dataset(0.8)
    res = collapse_fs(data, fit_extrapolation=False)

    def cost(nu):
        xs, ys = [], []
        for s in data.series:
            pm, vm = res.peaks[s.size], res.peak_values[s.size]
            xs.append(s.size ** nu * (s.p - pm))
            ys.append((vm - s.value) / s.value)
        return polynomial_residual(np.concatenate(xs), np.concatenate(ys))

    for nu in rng.uniform(*scaling.NU_BOUNDS, size=50):
        assert cost(nu) >= res.residual - 1e-15


def test_fs_nu_outside_bounds_is_flagged():
    res = collapse_fs(fs_dataset(1.2), fit_extrapolation=False)
    assert scaling.NU_BOUNDS[0] <= res.nu <= scaling.NU_BOUNDS[1]
    assert res.nu == pytest.approx(1.0, abs=1e-4)
    assert "nu at search bound" in res.flags


@pytest.mark.parametrize("nu", [0.75, 0.9])
def test_witness_round_trip(nu):
    res = collapse_witness(witness_dataset(nu))
    assert res.nu == pytest.approx(nu, abs=1e-3)
    assert res.p_c == pytest.approx(0.5, abs=1e-3)


@pytest.mark.slow
@pytest.mark.parametrize("nu,beta", [(1.0, 0.125), (0.8, 0.2)])
def test_m_round_trip(nu, beta):
    res = collapse_m(m_dataset(nu, beta))
    assert res.nu == pytest.approx(nu, abs=1e-3)
    assert res.beta == pytest.approx(beta, abs=1e-3)
    assert res.p_c == pytest.approx(0.5, abs=1e-4)
    assert res.residual < 1e-6
    assert set(res.uncertainties) == {"nu", "beta", "p_c"}


def test_m_bounds_honored():
    res = collapse_m(m_dataset(0.8, 0.4), beta_bounds=(0.125, 0.314))
    assert 0.125 <= res.beta <= 0.314
    assert "beta at search bound" in res.flags
    assert 0.622 <= res.nu <= 1.0


def test_bounded_minimize_reflection():
    f = lambda x: float((x[0] - 2.0) ** 2 + (x[1] + 1.0) ** 2)
    x, fx, at = bounded_minimize(f, [(0.0, 1.0), (-3.0, 3.0)])
    assert x[0] == pytest.approx(1.0, abs=1e-6)
    assert x[1] == pytest.approx(-1.0, abs=1e-5)
    assert at == [True, False]
    assert 0.0 <= x[0] <= 1.0


def test_power_law_and_log_fits():
    D = np.array([3, 5, 7, 9, 11])
    pl = fit_power_law(D, 3 * D ** 2.0)
    assert pl.k == pytest.approx(2.0, abs=1e-12)
    assert pl.extra["intercept"] == pytest.approx(math.log(3), abs=1e-12)
    lg = fit_log_divergence(D, 2 * np.log(D) + 1)
    assert lg.k == pytest.approx(2.0, abs=1e-12)
    assert lg.extra["intercept"] == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ScalingError):
        fit_power_law(D[:2], D[:2])
    with pytest.raises(ScalingError):
        fit_power_law(D, -D)


def test_asymptote_exact_recovery():
    s = np.array([3, 5, 7, 9, 11, 13])
    res = fit_asymptote(s, 0.5 + 0.3 / s ** 1.5)
    assert res.p_c == pytest.approx(0.5, abs=1e-8)
    assert res.alpha == pytest.approx(0.3, abs=1e-7)
    assert res.delta == pytest.approx(1.5, abs=1e-7)
    three = fit_asymptote(s[:3], 0.5 + 0.3 / s[:3] ** 1.5)
    assert any("three points" in f for f in three.flags)


def test_phase_boundary_fit():
    g = np.linspace(0.0, 0.4, 9)
    lam = 0.429 - 1.09 * g + 0.59 * g ** 2
    res = fit_phase_boundary(g, lam, np.full(g.size, 0.005), "quadratic", cutoff=0.05)
    np.testing.assert_allclose(res.extra["coefficients"], [0.429, -1.09, 0.59], atol=1e-10)
    assert res.extra["n_points"] == 8
    lin = fit_phase_boundary(g, 0.279 - 0.693 * g, form="linear")
    np.testing.assert_allclose(lin.extra["coefficients"], [0.279, -0.693], atol=1e-12)
    with pytest.raises(ValueError):
        fit_phase_boundary(g, lam, form="cubic")
    with pytest.raises(ScalingError):
        fit_phase_boundary(g[:2], lam[:2])


def test_dataset_validation_and_parity():
    data = fs_dataset(0.8, sizes=(3, 4, 5, 6, 7))
    assert data.filtered("odd").sizes == [3, 5, 7]
    assert data.filtered("even").sizes == [4, 6]
    with pytest.raises(ScalingError):
        collapse_fs(data.filtered("even"))


def test_no_peak_raises():
    p = np.linspace(0.4, 0.6, 11)
    data = ScalingDataset([Series(D, p, D * p) for D in SIZES])
    with pytest.raises(ScalingError, match="size 3"):
        collapse_fs(data)


def test_result_json():
    res = fit_asymptote([3, 5, 7], [0.6, 0.55, 0.53])
    d = json.loads(res.to_json({"inputs": ["a"]}))
    assert d["kind"] == "asymptote" and d["provenance"] == {"inputs": ["a"]}
    assert d["uncertainties"]["p_c"] == "nan"


def test_richardson_check():
    assert scaling.richardson_check(lambda h: 1.0 + h ** 2, 0.1) == pytest.approx(0.0075 / 1.0025)
