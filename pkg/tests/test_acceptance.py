"""End-to-end acceptance criteria 1-9.

Long sweeps are read from the verified run directories under
``data/acceptance`` (produced by ``scripts/acceptance_data.sh``). A run
whose manifest is missing or does not verify is recomputed from its config;
set ``TOPOCRIT_RECOMPUTE=1`` to recompute everything.
"""

import math
import os
from pathlib import Path

import numpy as np
import pytest

from topocrit import cli, ed, qmc, scaling
from topocrit.effective import closed_form_couplings, map_model, spectrum_check, SymmetricEffectiveSolver
from topocrit.lattice import all_stabilizers_commute, build_lattice
from topocrit.witness import (
    construct_witness_set,
    ghz_check,
    gf2_matrix_rank,
    mapped_s1_mask,
    pseudoincidence_matrix,
    verify_conditions,
    witness_expectation,
)

from conftest import ACCEPTANCE_LINES

ROOT = Path(__file__).resolve().parent.parent
RECOMPUTE = os.environ.get("TOPOCRIT_RECOMPUTE", "") not in ("", "0")


def report(n: int, ok: bool, detail: str):
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def run_config(name: str) -> dict:
    """Manifest of a config's run, reusing verified outputs."""
    cwd = os.getcwd()
    os.chdir(ROOT)
    try:
        cfg = cli.load_config(ROOT / "configs" / f"{name}.cfg")
        man = cli.run_experiment(cfg, reuse=not RECOMPUTE, log=lambda s: None)
        assert cli.verify_manifest(Path(cfg.output) / "manifest.json") == []
        return {"cfg": cfg, "manifest": man, "dir": ROOT / cfg.output}
    finally:
        os.chdir(cwd)


def result(name: str) -> dict:
    import json

    run = run_config(name)
    return json.loads((run["dir"] / "result.json").read_text())


def within(value, target, tol):
    return abs(value - target) <= tol


# --------------------------------------------------------------------------
# 1. algebraic and code invariants
# --------------------------------------------------------------------------


def test_criterion_1_code_invariants():
    cases = [("kitaev_square", 2, 3, 2), ("kitaev_triangular", 2, 3, 2),
             ("color_honeycomb", 3, 4, 4), ("color_square_octagonal", 2, 4, 4)]
    details, ok = [], True
    for fam, M, D, dim in cases:
        lat = build_lattice(fam, M, D)
        commute = all_stabilizers_commute(lat)
        gsd = ed.ground_space_dimension(lat)
        gap = ed.plaquette_flip_gap(lat)
        model = ed.CodeHamiltonian(lat)
        w = witness_expectation(model.ground_state(0.0).ground_state,
                                construct_witness_set(lat), model.basis)
        good = commute and gsd == dim and abs(gap - 2) <= 1e-10 and abs(w + 0.5) <= 1e-10
        ok &= good
        details.append(f"{fam}: dim={gsd} gap={gap:.12g} w={w:.12g}")
    report(1, ok, "; ".join(details))


# --------------------------------------------------------------------------
# 2. mapping identity
# --------------------------------------------------------------------------


def test_criterion_2_mapping_identity():
    points = [(0.0, 0.0), (0.2, 0.1), (0.4, 0.0), (0.5, 0.3), (0.1, 0.6)]
    worst_e = worst_w = 0.0
    forms_ok = True
    for fam in ("kitaev_square", "kitaev_triangular"):
        for D in (3, 5):
            lat = build_lattice(fam, 2, D)
            forms_ok &= map_model(lat, 0.0, 0.0).forms == closed_form_couplings(lat)
            ws = construct_witness_set(lat)
            solver = SymmetricEffectiveSolver(lat)
            mask = mapped_s1_mask(lat, ws)
            full = ed.CodeHamiltonian(lat)
            for g, lam in points:
                rep = spectrum_check(lat, g, lam)
                worst_e = max(worst_e, abs(rep.e_full - rep.e_effective))
                w = witness_expectation(full.ground_state(g, lam).ground_state, ws, full.basis)
                w_eff = -0.5 * solver.x_expectation(solver.ground_state(g, lam).ground_state, mask)
                worst_w = max(worst_w, abs(w - w_eff))
    ok = forms_ok and worst_e <= 1e-9 and worst_w <= 1e-8
    report(2, ok, f"closed forms equal={forms_ok} max|dE0|={worst_e:.2e} max|w-w~|={worst_w:.2e}")


# --------------------------------------------------------------------------
# 3. witness conditions
# --------------------------------------------------------------------------


def test_criterion_3_witness_conditions():
    cases = [("kitaev_square", 2, 5), ("kitaev_triangular", 2, 5),
             ("color_honeycomb", 3, 4), ("color_square_octagonal", 2, 4)]
    ok, details = True, []
    for fam, M, D in cases:
        ws = construct_witness_set(build_lattice(fam, M, D))
        rep = verify_conditions(ws)
        ghz = ghz_check(ws)
        ok &= rep.all_ok and ghz
        details.append(f"{fam} n={ws.n} conditions={rep.all_ok} ghz={ghz}")
        if ws.n == 4:
            sub = pseudoincidence_matrix(ws.reduced)[:, :3]
            expected = np.array([[1, 1, 1], [1, 0, 0], [0, 1, 0], [0, 0, 1]])
            ok &= bool(np.array_equal(sub, expected)) and gf2_matrix_rank(sub) == 3
    report(3, ok, "; ".join(details))


# --------------------------------------------------------------------------
# 4. fidelity susceptibility
# --------------------------------------------------------------------------


@pytest.mark.slow
def test_criterion_4_fs_divergence():
    rg = result("fs_square_g")
    rl = result("fs_square_lambda")
    ok = (within(rg["k"], 2.02, 0.10) and within(rl["k"], 1.98, 0.10)
          and within(rg["p_c"], 0.547, 0.02) and within(rl["p_c"], 0.496, 0.02)
          and rl["extra"]["parity"] == "odd")
    report(4, ok, f"k_g={rg['k']:.3f}+-{rg['k_err']:.3f} k_lambda={rl['k']:.3f}+-{rl['k_err']:.3f} "
                  f"g_c={rg['p_c']:.4f} lambda_c={rl['p_c']:.4f} (odd D {rl['extra']['sizes']})")


# --------------------------------------------------------------------------
# 5. QMC correctness
# --------------------------------------------------------------------------


def binder_crossing(h, u_small, u_large):
    diff = np.asarray(u_large) - np.asarray(u_small)
    for k in range(len(h) - 1):
        if diff[k] > 0 >= diff[k + 1] or diff[k] < 0 <= diff[k + 1]:
            t = diff[k] / (diff[k] - diff[k + 1])
            return h[k] + t * (h[k + 1] - h[k])
    return math.nan


def chain_thermal_abs_m(L, beta):
    n = L
    dim = 1 << n
    states = np.arange(dim)
    spins = 1 - 2 * ((states[:, None] >> np.arange(n)) & 1)
    H = np.diag(-(spins * np.roll(spins, -1, axis=1)).sum(axis=1).astype(float))
    for i in range(n):
        H[states, states ^ (1 << i)] -= 1.0
    w, v = np.linalg.eigh(H)
    rho = np.exp(-beta * (w - w[0]))
    probs = (v * v) @ (rho / rho.sum())
    return float(probs @ np.abs(spins.sum(axis=1)) / n)


@pytest.mark.slow
def test_criterion_5_qmc_correctness():
    est = qmc.run(qmc.IsingModel.chain(8), qmc.QmcConfig(beta=32.0, n_therm=1000, n_meas=20000, seed=55))
    ref = chain_thermal_abs_m(8, 32.0)
    z = abs(est.mean_abs_m - ref) / est.stderr
    h = np.round(np.arange(0.90, 1.101, 0.025), 6)
    curves = {}
    for L in (16, 32):
        cfg = qmc.QmcConfig(beta=2.0 * L, n_therm=1000, n_meas=6000, seed=700 + L)
        res = qmc.sweep(lambda hx: qmc.IsingModel.chain(L, 1.0, hx), h, cfg, size=L,
                        beta_check=False)
        curves[L] = [r.estimate.binder for r in res.rows]
    # the Binder cumulant falls with the field, faster for the larger chain
    h_c = binder_crossing(h, curves[16], curves[32])
    ok = z <= 3 and within(h_c, 1.0, 0.05)
    report(5, ok, f"L=8 <|m|>={est.mean_abs_m:.5f}+-{est.stderr:.5f} vs ED {ref:.5f} ({z:.2f} sigma); "
                  f"Binder crossing h_c={h_c:.4f}")


# --------------------------------------------------------------------------
# 6. Table I
# --------------------------------------------------------------------------

TABLE_I = [
    ("qmc_square_g", 0.541),
    ("qmc_square_lambda", 0.494),
    ("qmc_triangular_g", 0.400),
    ("qmc_triangular_lambda", 0.276),
    ("qmc_narrow_g", 0.368),
]


@pytest.mark.slow
def test_criterion_6_table_one():
    ok, details = True, []
    for name, target in TABLE_I:
        r = result(name)
        hit = within(r["p_c"], target, 0.02)
        ok &= hit
        details.append(f"{name}: p_c={r['p_c']:.4f} (nu={r['nu']:.3f}, beta={r['beta']:.3f}) "
                       f"target {target}")
    report(6, ok, "; ".join(details))


# --------------------------------------------------------------------------
# 7. witness criticality
# --------------------------------------------------------------------------


@pytest.mark.slow
def test_criterion_7_witness():
    sq = result("witness_square_g")
    sl = result("witness_square_lambda")
    hc = result("witness_honeycomb_g")
    so = result("witness_square_octagonal_g")
    checks = {
        "k": within(sq["k"], 1.09, 0.15),
        "g_c": within(sq["p_c"], 0.543, 0.02),
        "lambda_c": within(sl["p_c"], 0.497, 0.02),
        "honeycomb": within(hc["p_c"], 0.406, 0.02),
        "square_octagonal": within(so["p_c"], 0.401, 0.02),
    }
    failed = [k for k, v in checks.items() if not v]
    report(7, not failed,
           f"k={sq['k']:.3f}+-{sq['k_err']:.3f} (2k={2 * sq['k']:.3f}) g_c={sq['p_c']:.4f} "
           f"lambda_c={sl['p_c']:.4f} honeycomb g_c={hc['p_c']:.4f} "
           f"square-octagonal g_c={so['p_c']:.4f}" + (f"; failed: {', '.join(failed)}" if failed else ""))


# --------------------------------------------------------------------------
# 8. odd-even dichotomy
# --------------------------------------------------------------------------


def local_minima(p, v):
    return [p[k] for k in range(1, len(v) - 1) if v[k] < v[k - 1] and v[k] <= v[k + 1]]


def kink_location(p, v):
    """Grid point with the largest second difference in magnitude."""
    d2 = np.abs(np.diff(v, 2))
    return float(p[int(np.argmax(d2)) + 1])


@pytest.mark.slow
def test_criterion_8_odd_even():
    cols5, _ = cli.read_table(next(run_config("gap_square_D5")["dir"].glob("*.csv")))
    cols4, _ = cli.read_table(next(run_config("gap_square_D4")["dir"].glob("*.csv")))
    odd_ok = bool(np.all(np.abs(cols5["value"]) < 1e-8)) and cols5["p"].max() >= 2.0
    p4, g4 = cols4["p"], cols4["value"]
    positive = bool(np.all(g4[p4 > 0] > 0))
    minima = [m for m in local_minima(p4, g4) if within(m, 0.494, 0.05)]
    kink = kink_location(p4, g4)
    kind = "maximum" if g4[np.argmin(np.abs(p4 - kink))] >= g4.max() - 1e-12 else "interior point"
    ok = odd_ok and positive and bool(minima)
    report(8, ok, f"D=5 max gap={np.abs(cols5['value']).max():.1e}; D=4 gap>0 for lambda>0: {positive}; "
                  f"local minima near 0.494: {minima}; level-crossing kink at lambda={kink:.3f} "
                  f"({kind}, gap={g4.max():.4f})")


# --------------------------------------------------------------------------
# 9. phase boundaries
# --------------------------------------------------------------------------

SQUARE_G = (0.05, 0.10, 0.15, 0.20, 0.25, 0.30, 0.35, 0.40)
TRIANGULAR_G = (0.03, 0.08, 0.13, 0.18, 0.23, 0.28)


def boundary_fit(prefix, gs, form, cutoff):
    files = []
    for g in gs:
        result(f"{prefix}_g{g:.2f}")
        files.append(ROOT / "data" / "acceptance" / f"{prefix}_g{g:.2f}" / "result.json")
    g, lam, err = cli.phase_boundary_points(files)
    if not np.all(np.isfinite(err)):
        err = None
    return scaling.fit_phase_boundary(g, lam, err, form, cutoff), g, lam


def coefficients_agree(fit, target, target_err):
    c = np.array(fit.extra["coefficients"])
    e = np.array(fit.extra["errors"])
    sigma = np.sqrt(e ** 2 + np.asarray(target_err) ** 2)
    return bool(np.all(np.abs(c - target) <= 2 * sigma)), c, e


@pytest.mark.slow
def test_criterion_9_phase_boundaries():
    sq, g1, l1 = boundary_fit("boundary_square", SQUARE_G, "quadratic", 0.05)
    tr, g2, l2 = boundary_fit("boundary_triangular", TRIANGULAR_G, "linear", 0.01)
    ok1, c1, e1 = coefficients_agree(sq, [0.429, -1.09, 0.59], [0.004, 0.04, 0.07])
    ok2, c2, e2 = coefficients_agree(tr, [0.279, -0.693], [0.001, 0.004])
    fmt = lambda c, e: ", ".join(f"{a:.4f}+-{b:.4f}" for a, b in zip(c, e))
    report(9, ok1 and ok2, f"square quadratic ({fmt(c1, e1)}); triangular linear ({fmt(c2, e2)})")
