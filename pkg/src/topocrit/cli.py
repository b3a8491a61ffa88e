"""Command-line driver: sweeps, collapses, fits and manifests.

Configuration files are flat ``key = value`` text under an
``[experiment]`` section; every key can also be given as a flag. Outputs
carry the configuration hash and master seed, and each run directory gets
a ``manifest.json`` listing versions, defaults in force and output hashes.

Exit codes: 0 success, 2 validation error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import hashlib
import json
import math
import os
import platform
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy

from . import __version__, ed, effective, kernels, qmc, scaling, witness
from .lattice import COLOR_FAMILIES, LatticeError, build_lattice, canonical_family, dump_lattice

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NUMERICAL = 3

METHODS = ("ed", "map_ed", "qmc")
OBSERVABLES = ("fs", "m", "witness", "gap")
AXES = ("g", "lambda")


class ConfigError(ValueError):
    """Invalid or incompatible experiment configuration."""


class NumericalFailure(RuntimeError):
    """A sweep or fit could not produce a trustworthy number."""


# --------------------------------------------------------------------------
# configuration
# --------------------------------------------------------------------------


def parse_grid(text) -> list[float]:
    """``start:stop:step`` (stop inclusive) or a comma-separated list."""
    if isinstance(text, (list, tuple)):
        return [float(x) for x in text]
    text = str(text).strip()
    if not text:
        return []
    if ":" in text:
        parts = [float(x) for x in text.split(":")]
        if len(parts) != 3 or parts[2] <= 0:
            raise ConfigError(f"bad grid {text!r}; expected start:stop:step")
        start, stop, step = parts
        n = int(math.floor((stop - start) / step + 1e-9)) + 1
        return [round(start + k * step, 12) for k in range(max(n, 0))]
    return [float(x) for x in text.split(",") if x.strip()]


def parse_sizes(text) -> list[int]:
    """Comma list with optional ``a-b`` or ``a-b/step`` ranges."""
    if isinstance(text, int):
        return [text]
    if isinstance(text, (list, tuple)):
        return [int(x) for x in text]
    out = []
    for part in str(text).split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part:
            rng, _, step = part.partition("/")
            a, b = (int(x) for x in rng.split("-"))
            out.extend(range(a, b + 1, int(step) if step else 1))
        else:
            out.append(int(part))
    return out


@dataclass
class ExperimentConfig:
    family: str = "kitaev_square"
    boundary: str = "cylinder"
    M: list = field(default_factory=lambda: [2])
    D: list = field(default_factory=lambda: [3])
    axis: str = "g"
    grid: list = field(default_factory=list)
    fixed: float = 0.0
    method: str = "ed"
    observable: str = "fs"
    seed: int = 12345
    output: str = "out"
    tol: float = ed.DEFAULT_TOL
    delta: float = ed.FS_DELTA
    policy: str = "sector"
    beta: float | None = None
    n_therm: int = 2000
    n_meas: int = 20000
    n_bins: int = qmc.DEFAULT_BINS
    beta_check: bool = True
    collapse: str = "none"
    parity: str = "auto"
    allow_decoupled: bool = False
    workers: int = 1

    @property
    def size_key(self) -> str:
        return "M" if len(self.M) > 1 else "D"

    @property
    def sizes(self) -> list[tuple[int, int]]:
        return [(m, d) for m in self.M for d in self.D]

    def canonical(self) -> dict:
        d = asdict(self)
        d.pop("output")
        d.pop("workers")
        return d

    def config_hash(self) -> str:
        blob = json.dumps(self.canonical(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def effective_parity(self) -> str | None:
        if self.parity == "auto":
            # Ising-axis square ladders: odd D only unless asked otherwise
            if self.family == "kitaev_square" and self.axis == "lambda" and self.size_key == "D":
                return "odd"
            return None
        return None if self.parity == "all" else self.parity


_FIELD_TYPES = {f.name: f.type for f in fields(ExperimentConfig)}


def _coerce(name: str, value):
    if value is None:
        return None
    if name in ("M", "D"):
        return parse_sizes(value)
    if name == "grid":
        return parse_grid(value)
    kind = _FIELD_TYPES[name]
    if kind == "bool":
        if isinstance(value, bool):
            return value
        return str(value).strip().lower() in ("1", "true", "yes", "on")
    if kind == "int":
        return int(value)
    if kind in ("float", "float | None"):
        if str(value).strip().lower() in ("none", ""):
            return None
        return float(value)
    return str(value).strip()


def load_config(path=None, overrides: dict | None = None) -> ExperimentConfig:
    """Read a flat ``[experiment]`` file and apply non-None ``overrides``."""
    values = {}
    if path is not None:
        cp = configparser.ConfigParser()
        cp.optionxform = str
        if not cp.read(path):
            raise ConfigError(f"cannot read config {path}")
        if not cp.has_section("experiment"):
            raise ConfigError("config needs an [experiment] section")
        for key, val in cp.items("experiment"):
            key = key.replace("-", "_")
            if key not in _FIELD_TYPES:
                raise ConfigError(f"unknown config key {key!r}")
            values[key] = _coerce(key, val)
    for key, val in (overrides or {}).items():
        if val is not None:
            values[key] = _coerce(key, val)
    cfg = ExperimentConfig(**values)
    validate_config(cfg)
    return cfg


def compatibility(method: str, observable: str, family: str, axis: str = "g") -> str | None:
    """Reason a combination cannot run, or ``None`` if it can."""
    if method not in METHODS:
        return f"unknown method {method!r}; choose from {', '.join(METHODS)}"
    if observable not in OBSERVABLES:
        return f"unknown observable {observable!r}; choose from {', '.join(OBSERVABLES)}"
    if axis not in AXES:
        return f"unknown axis {axis!r}; choose g or lambda"
    color = family in COLOR_FAMILIES
    if color and axis == "lambda":
        return "the Ising perturbation is defined for Kitaev lattices only"
    if method == "qmc":
        if observable == "witness":
            return "QMC does not estimate the off-diagonal witness operator"
        if observable != "m":
            return f"QMC estimates magnetization only, not {observable!r}"
        if color:
            return "color-code effective models have three-body terms outside the cluster algorithm"
        return None
    if observable == "m":
        return "magnetization is a QMC observable; use method=qmc"
    if method == "map_ed" and observable != "witness":
        return f"method map_ed computes the mapped witness only; use method=ed for {observable!r}"
    return None


def validate_config(cfg: ExperimentConfig):
    try:
        cfg.family = canonical_family(cfg.family)
    except LatticeError as exc:
        raise ConfigError(str(exc)) from exc
    msg = compatibility(cfg.method, cfg.observable, cfg.family, cfg.axis)
    if msg:
        raise ConfigError(msg)
    if cfg.boundary not in ("cylinder", "torus"):
        raise ConfigError("boundary must be cylinder or torus")
    if not cfg.grid:
        raise ConfigError("empty parameter grid")
    if any(p < 0 for p in cfg.grid) or cfg.fixed < 0:
        raise ConfigError("parameters must be non-negative")
    if any(b <= a for a, b in zip(cfg.grid, cfg.grid[1:])):
        raise ConfigError("grid must be strictly increasing")
    if not cfg.M or not cfg.D:
        raise ConfigError("empty size list")
    if len(cfg.M) > 1 and len(cfg.D) > 1:
        raise ConfigError("vary either M or D, not both")
    if cfg.collapse not in ("none", "fs", "m", "witness"):
        raise ConfigError(f"unknown collapse {cfg.collapse!r}")
    if cfg.collapse != "none" and cfg.collapse != {"fs": "fs", "m": "m", "witness": "witness"}.get(
        cfg.observable, None
    ):
        raise ConfigError(f"collapse {cfg.collapse!r} does not match observable {cfg.observable!r}")
    if cfg.parity not in ("auto", "all", "odd", "even"):
        raise ConfigError("parity must be auto, all, odd or even")
    if cfg.policy not in ("sector", "none"):
        raise ConfigError("policy must be sector or none")
    if cfg.workers < 1:
        raise ConfigError("workers must be >= 1")
    if cfg.method == "qmc":
        try:
            _qmc_config(cfg).validate()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc


def defaults_in_force(cfg: ExperimentConfig) -> dict:
    """Every default choice that shapes the numbers of a run."""
    return {
        "ed_residual_rule": "||Hv - Ev|| <= tol * max(1, |E|)",
        "ed_tol": cfg.tol,
        "ed_dense_threshold": ed.DENSE_SOLVE_DIM,
        "ed_dense_qubit_cap": ed.DENSE_QUBIT_CAP,
        "ed_sector_policy": cfg.policy,
        "fs_delta": cfg.delta,
        "fs_stencil": "fidelity between p - delta/2 and p + delta/2",
        "qmc_rng": kernels.RNG_NAME,
        "qmc_beta_rule": "max(2 * size, 64) unless beta is set",
        "qmc_observable": "<|m|> with Binder cumulant cross-check",
        "qmc_bins": cfg.n_bins,
        "qmc_discard_fraction": qmc.DISCARD_FRACTION,
        "collapse_polynomial_degree": scaling.POLY_DEGREE,
        "collapse_nu_bounds": list(scaling.NU_BOUNDS),
        "collapse_beta_bounds": list(scaling.BETA_BOUNDS),
        "collapse_optimizer": f"Nelder-Mead with reflection, {scaling.N_STARTS}-point multistart",
        "peak_estimator": "parabola through the three samples around the discrete maximum",
        "parity_filter": cfg.effective_parity() or "all",
        "witness_derivative": "central differences, one-sided at the ends",
        "backend": kernels.BACKEND,
    }


def versions() -> dict:
    return {
        "topocrit": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "python": platform.python_version(),
        "backend": kernels.BACKEND,
    }


# --------------------------------------------------------------------------
# sweeps
# --------------------------------------------------------------------------


def _params(axis: str, p: float, fixed: float) -> tuple[float, float]:
    return (p, fixed) if axis == "g" else (fixed, p)


def _qmc_config(cfg: ExperimentConfig) -> qmc.QmcConfig:
    return qmc.QmcConfig(beta=cfg.beta, n_therm=cfg.n_therm, n_meas=cfg.n_meas,
                         n_bins=cfg.n_bins, seed=cfg.seed)


def _size_seed(cfg: ExperimentConfig, M: int, D: int) -> int:
    return qmc.derive_seed(cfg.seed, 1000 * M + D)


ED_COLUMNS = ("family", "M", "D", "boundary", "axis", "p", "value", "residual", "seed")
WITNESS_COLUMNS = ("family", "M", "D", "axis", "p", "w", "dw_dp", "E_gm", "E_neg", "residual")
QMC_COLUMNS = qmc.QMC_COLUMNS + ("binder_err",)


def sweep_ed(cfg: ExperimentConfig, M: int, D: int):
    """Columns, rows and notes of one ED sweep."""
    lattice = build_lattice(cfg.family, M, D, cfg.boundary)
    seed = _size_seed(cfg, M, D) % (1 << 31)
    if cfg.observable == "fs":
        model = ed.CodeHamiltonian(lattice, cfg.policy)
        pts = ed.fs_sweep(lattice, cfg.axis, cfg.grid, cfg.fixed, cfg.delta, cfg.policy,
                          seed=seed, model=model)
        return _point_rows(cfg, M, D, seed, pts)
    if cfg.observable == "gap":
        pts = ed.energy_gap(lattice, cfg.axis, cfg.grid, cfg.fixed)
        return _point_rows(cfg, M, D, seed, pts)
    # witness of the full code Hamiltonian
    ws = witness.construct_witness_set(lattice)
    model = ed.CodeHamiltonian(lattice, "sector")
    vals, res = [], []
    for p in cfg.grid:
        sol = model.ground_state(*_params(cfg.axis, p, cfg.fixed), seed=seed, tol=cfg.tol)
        vals.append(witness.witness_expectation(sol.ground_state, ws, model.basis))
        res.append(float(sol.residuals[0]))
    return _witness_rows(cfg, M, D, vals, res)


def sweep_map_ed(cfg: ExperimentConfig, M: int, D: int):
    """Mapped witness from the symmetric-sector effective ground state."""
    lattice = build_lattice(cfg.family, M, D, cfg.boundary)
    ws = witness.construct_witness_set(lattice)
    mask = witness.mapped_s1_mask(lattice, ws)
    solver = effective.SymmetricEffectiveSolver(lattice)
    seed = _size_seed(cfg, M, D) % (1 << 31)
    vals, res = [], []
    for p in cfg.grid:
        sol = solver.ground_state(*_params(cfg.axis, p, cfg.fixed), seed=seed, tol=cfg.tol)
        vals.append(-0.5 * solver.x_expectation(sol.ground_state, mask))
        res.append(float(sol.residuals[0]))
    return _witness_rows(cfg, M, D, vals, res)


def _point_rows(cfg, M, D, seed, pts):
    rows = [(cfg.family, M, D, cfg.boundary, cfg.axis, pt.p, pt.value, pt.residual, seed)
            for pt in pts]
    notes = [f"failed point p={pt.p!r}: {pt.message}" for pt in pts if not pt.ok]
    return ED_COLUMNS, rows, notes


def _witness_rows(cfg, M, D, w, res):
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", witness.ResolutionWarning)
        if len(cfg.grid) >= 3:
            d = witness.witness_derivative(cfg.grid, w)
        else:
            d = [math.nan] * len(w)
    rows = []
    for p, wv, dv, r in zip(cfg.grid, w, d, res):
        wc = min(max(wv, -0.5), 0.5)
        rows.append((cfg.family, M, D, cfg.axis, p, wv, dv, witness.lower_bound_gm(wc),
                     witness.lower_bound_negativity(wc), r))
    notes = [str(c.message) for c in caught]
    return WITNESS_COLUMNS, rows, notes


def sweep_qmc(cfg: ExperimentConfig, M: int, D: int):
    lattice = build_lattice(cfg.family, M, D, cfg.boundary)
    size = M if cfg.size_key == "M" else D
    qc = _qmc_config(cfg)
    qc.seed = _size_seed(cfg, M, D)
    factory = lambda p: effective.map_model(lattice, *_params(cfg.axis, p, cfg.fixed))
    res = qmc.sweep(factory, cfg.grid, qc, size=size, allow_decoupled=cfg.allow_decoupled,
                    beta_check=cfg.beta_check)
    rows = []
    for r in res.rows:
        if not r.ok:
            raise NumericalFailure(f"QMC failed at p={r.p}: {r.message}")
        e = r.estimate
        rows.append((cfg.family, M, D, cfg.axis, r.p, e.beta, e.sweeps, e.seed, e.mean_abs_m,
                     e.stderr, e.binder, e.binder_err))
    notes = [
        "beta check p={p:.6g} beta={beta:g}: m={m_beta:.6g} vs 2beta m={m_2beta:.6g} "
        "shift={shift_sigma:.2f} sigma".format(**c)
        for c in res.beta_checks
    ]
    return QMC_COLUMNS, rows, notes


def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return ed.fmt12(v)


def write_table(path: Path, columns, rows, header: Sequence[str]):
    with open(path, "w", newline="") as fh:
        for line in header:
            fh.write(f"# {line}\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def read_table(path) -> tuple[dict, dict]:
    """Columns as float arrays plus the ``# key = value`` header entries."""
    meta, lines = {}, []
    with open(path) as fh:
        for line in fh:
            if line.startswith("#"):
                key, sep, val = line[1:].partition("=")
                if sep:
                    meta[key.strip()] = val.strip()
                continue
            lines.append(line)
    reader = csv.reader(lines)
    header = next(reader)
    data = [row for row in reader if row]
    cols = {}
    for k, name in enumerate(header):
        try:
            cols[name] = np.array([float(r[k]) for r in data])
        except ValueError:
            cols[name] = np.array([r[k] for r in data])
    return cols, meta


def file_sha256(path) -> str:
    return scaling.file_hash(path)


def output_name(cfg: ExperimentConfig, M: int, D: int) -> str:
    return f"{cfg.method}_{cfg.observable}_{cfg.family}_M{M}_D{D}_{cfg.axis}.csv"


def _run_one(cfg: ExperimentConfig, M: int, D: int):
    fn = {"ed": sweep_ed, "map_ed": sweep_map_ed, "qmc": sweep_qmc}[cfg.method]
    return fn(cfg, M, D)


def _manifest_path(outdir: Path) -> Path:
    return outdir / "manifest.json"


def cached_outputs(cfg: ExperimentConfig) -> dict | None:
    """Existing manifest for this exact configuration, if every output verifies."""
    path = _manifest_path(Path(cfg.output))
    if not path.exists():
        return None
    try:
        man = json.loads(path.read_text())
    except json.JSONDecodeError:
        return None
    if man.get("config_hash") != cfg.config_hash():
        return None
    if verify_manifest(path):
        return None
    return man


def run_experiment(cfg: ExperimentConfig, reuse: bool = True, log=print) -> dict:
    """Run all sweeps of ``cfg`` (reusing verified outputs) and write a manifest."""
    validate_config(cfg)
    if reuse:
        man = cached_outputs(cfg)
        if man is not None:
            log(f"reusing verified outputs in {cfg.output}")
            return man
    outdir = Path(cfg.output)
    outdir.mkdir(parents=True, exist_ok=True)
    chash = cfg.config_hash()
    jobs = cfg.sizes
    if cfg.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_run_one, [cfg] * len(jobs), *zip(*jobs)))
    else:
        results = []
        for M, D in jobs:
            log(f"sweep {cfg.method}/{cfg.observable} {cfg.family} M={M} D={D}")
            results.append(_run_one(cfg, M, D))
    outputs = {}
    for (M, D), (cols, rows, notes) in zip(jobs, results):
        name = output_name(cfg, M, D)
        header = [
            f"config_hash = {chash}",
            f"seed = {cfg.seed}",
            f"family = {cfg.family}",
            f"boundary = {cfg.boundary}",
            f"M = {M}",
            f"D = {D}",
            f"axis = {cfg.axis}",
            f"fixed = {cfg.fixed!r}",
            f"method = {cfg.method}",
            f"observable = {cfg.observable}",
        ] + ([f"rng = {kernels.RNG_NAME}"] if cfg.method == "qmc" else []) + [
            f"note: {n}" for n in notes
        ]
        write_table(outdir / name, cols, rows, header)
        outputs[name] = file_sha256(outdir / name)
    man = {
        "config": cfg.canonical(),
        "config_hash": chash,
        "seed": cfg.seed,
        "versions": versions(),
        "defaults": defaults_in_force(cfg),
        "outputs": outputs,
    }
    if cfg.collapse != "none":
        result = collapse_outputs(cfg, [outdir / n for n in outputs])
        text = result_json(result, cfg, [outdir / n for n in outputs])
        (outdir / "result.json").write_text(text)
        man["outputs"]["result.json"] = file_sha256(outdir / "result.json")
    _manifest_path(outdir).write_text(json.dumps(man, indent=2, sort_keys=True) + "\n")
    return man


# --------------------------------------------------------------------------
# collapse and fits from files
# --------------------------------------------------------------------------


def load_dataset(paths, value_column: str = "value", size_key: str = "D",
                 error_column: str | None = None) -> scaling.ScalingDataset:
    series, meta = [], {}
    for path in paths:
        cols, m = read_table(path)
        if value_column not in cols:
            raise ConfigError(f"{path}: no column {value_column!r}")
        if size_key in cols:
            size = int(cols[size_key][0])
        elif size_key in m:
            size = int(m[size_key])
        else:
            raise ConfigError(f"{path}: no size entry {size_key!r}")
        err = cols.get(error_column) if error_column else None
        series.append(scaling.Series(size, cols["p"], cols[value_column], err))
        meta = {k: m[k] for k in ("family", "axis", "method", "observable") if k in m}
    return scaling.ScalingDataset(series, meta)


def collapse_outputs(cfg: ExperimentConfig, paths) -> scaling.ScalingResult:
    kind = cfg.collapse
    column = {"fs": "value", "m": "mean_abs_m", "witness": "dw_dp"}[kind]
    err = "stderr" if kind == "m" else None
    data = load_dataset(paths, column, cfg.size_key, err)
    return collapse_dataset(data, kind, cfg.effective_parity())


def collapse_dataset(data: scaling.ScalingDataset, kind: str, parity: str | None = None,
                     **kwargs) -> scaling.ScalingResult:
    """Collapse plus the matching divergence fit of the peak heights."""
    data = data.filtered(parity)
    if kind == "fs":
        res = scaling.collapse_fs(data, **kwargs)
        fit = scaling.fit_power_law(sorted(res.peak_values), [res.peak_values[s] for s in sorted(res.peak_values)])
    elif kind == "witness":
        res = scaling.collapse_witness(data, **kwargs)
        fit = scaling.fit_log_divergence(sorted(res.peak_values), [res.peak_values[s] for s in sorted(res.peak_values)])
    elif kind == "m":
        res = scaling.collapse_m(data, **kwargs)
        fit = None
    else:
        raise ConfigError(f"unknown collapse kind {kind!r}")
    if fit is not None:
        res.k, res.k_err = fit.k, fit.k_err
        res.extra["divergence_fit_residual"] = fit.residual
    res.extra["sizes"] = sorted(data.sizes)
    res.extra["parity"] = parity or "all"
    return res


def result_json(result: scaling.ScalingResult, cfg: ExperimentConfig | None, paths) -> str:
    prov = {"inputs": {Path(p).name: file_sha256(p) for p in paths}}
    if cfg is not None:
        prov.update(config_hash=cfg.config_hash(), seed=cfg.seed, fixed=cfg.fixed,
                    axis=cfg.axis, family=cfg.family)
    return result.to_json(prov) + "\n"


def verify_manifest(path) -> list[str]:
    """Problems found when re-checking a manifest (empty when it verifies)."""
    path = Path(path)
    problems = []
    try:
        man = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        return [f"unreadable manifest: {exc}"]
    try:
        cfg = ExperimentConfig(**man["config"])
    except (KeyError, TypeError) as exc:
        return [f"manifest config invalid: {exc}"]
    if cfg.config_hash() != man.get("config_hash"):
        problems.append("config hash does not match the recorded configuration")
    for name, digest in man.get("outputs", {}).items():
        f = path.parent / name
        if not f.exists():
            problems.append(f"missing output {name}")
            continue
        if file_sha256(f) != digest:
            problems.append(f"hash mismatch for {name}")
        if f.suffix == ".csv":
            _, meta = read_table(f)
            if meta.get("config_hash") != man.get("config_hash"):
                problems.append(f"{name} carries a different config hash")
            if meta.get("seed") != str(man.get("seed")):
                problems.append(f"{name} carries a different seed")
        elif f.suffix == ".json":
            prov = json.loads(f.read_text()).get("provenance", {})
            if prov.get("config_hash") != man.get("config_hash"):
                problems.append(f"{name} carries a different config hash")
    return problems


def phase_boundary_points(paths) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(g, lambda_c, error) from collapse results at fixed field."""
    g, lam, err = [], [], []
    for p in paths:
        d = json.loads(Path(p).read_text())
        prov = d.get("provenance", {})
        if prov.get("axis") != "lambda":
            raise ConfigError(f"{p}: not a lambda-axis result")
        g.append(float(prov["fixed"]))
        lam.append(float(d["p_c"]))
        e = d.get("uncertainties", {}).get("p_c")
        err.append(float(e) if e not in (None, "nan") else math.nan)
    order = np.argsort(g)
    return np.array(g)[order], np.array(lam)[order], np.array(err)[order]


# --------------------------------------------------------------------------
# argument parsing
# --------------------------------------------------------------------------


def _add_config_flags(ap: argparse.ArgumentParser, method: bool = True, observable: bool = True):
    ap.add_argument("--config", help="flat key=value config file")
    ap.add_argument("--family")
    ap.add_argument("--boundary")
    ap.add_argument("--M", help="size list, e.g. 2 or 15-51/4")
    ap.add_argument("--D", help="size list, e.g. 3,5,7,9 or 39-75/12")
    ap.add_argument("--axis", choices=AXES)
    ap.add_argument("--grid", help="start:stop:step or comma list")
    ap.add_argument("--fixed", type=float, help="value of the other parameter")
    if method:
        ap.add_argument("--method")
    if observable:
        ap.add_argument("--observable")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--output", help="output directory")
    ap.add_argument("--tol", type=float)
    ap.add_argument("--delta", type=float)
    ap.add_argument("--policy")
    ap.add_argument("--beta", type=float)
    ap.add_argument("--n-therm", type=int, dest="n_therm")
    ap.add_argument("--n-meas", type=int, dest="n_meas")
    ap.add_argument("--n-bins", type=int, dest="n_bins")
    ap.add_argument("--no-beta-check", action="store_const", const=False, dest="beta_check")
    ap.add_argument("--collapse")
    ap.add_argument("--parity")
    ap.add_argument("--allow-decoupled", action="store_const", const=True, dest="allow_decoupled")
    ap.add_argument("--workers", type=int)
    ap.add_argument("--recompute", action="store_true", help="ignore verified cached outputs")


def _config_from_args(args, **forced) -> ExperimentConfig:
    keys = [f.name for f in fields(ExperimentConfig)]
    over = {k: getattr(args, k, None) for k in keys}
    for k, v in forced.items():
        if over.get(k) is None:
            over[k] = v
    return load_config(args.config, over)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="topocrit", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("lattice", help="print lattice geometry and stabilizers")
    p.add_argument("--family", required=True)
    p.add_argument("--M", type=int, required=True)
    p.add_argument("--D", type=int, required=True)
    p.add_argument("--boundary", default="cylinder")
    p.add_argument("--summary", action="store_true")

    p = sub.add_parser("map", help="print the effective spin model")
    p.add_argument("--family", required=True)
    p.add_argument("--M", type=int, required=True)
    p.add_argument("--D", type=int, required=True)
    p.add_argument("--boundary", default="cylinder")
    p.add_argument("--g", type=float, default=0.0)
    p.add_argument("--lam", type=float, default=0.0)
    p.add_argument("--check", action="store_true", help="compare spectra with the full model")

    _add_config_flags(sub.add_parser("ed-sweep", help="exact-diagonalization sweep"), method=False)
    _add_config_flags(sub.add_parser("qmc-sweep", help="QMC magnetization sweep"),
                      method=False, observable=False)
    _add_config_flags(sub.add_parser("witness-sweep", help="witness sweep"), observable=False)
    _add_config_flags(sub.add_parser("run", help="full pipeline from a config file"))

    p = sub.add_parser("collapse", help="data collapse of sweep CSV files")
    p.add_argument("--kind", choices=("fs", "m", "witness"), required=True)
    p.add_argument("inputs", nargs="+")
    p.add_argument("--size-key", default="D")
    p.add_argument("--parity", choices=("all", "odd", "even"), default="all")
    p.add_argument("--nu-bounds", type=float, nargs=2)
    p.add_argument("--output")

    p = sub.add_parser("fit", help="divergence or asymptote fit of (size, value) points")
    p.add_argument("--kind", choices=("power", "log", "asymptote"), required=True)
    p.add_argument("--points", help="size:value pairs, comma separated")
    p.add_argument("--result", help="collapse result JSON whose peaks are used")
    p.add_argument("--output")

    p = sub.add_parser("phase-boundary", help="fit lambda_c(g) from lambda-axis results")
    p.add_argument("inputs", nargs="+", help="result JSON files or a g,lambda_c,err CSV")
    p.add_argument("--form", choices=("quadratic", "linear"), default="quadratic")
    p.add_argument("--cutoff", type=float, default=0.0)
    p.add_argument("--output")

    p = sub.add_parser("verify-manifest", help="re-check output hashes of a run")
    p.add_argument("manifest")
    return ap


def _emit(text: str, output: str | None):
    if output:
        Path(output).write_text(text)
    else:
        sys.stdout.write(text)


def _cmd_lattice(args):
    lat = build_lattice(args.family, args.M, args.D, args.boundary)
    print(lat.summary() if args.summary else dump_lattice(lat))


def _cmd_map(args):
    lat = build_lattice(args.family, args.M, args.D, args.boundary)
    model = effective.map_model(lat, args.g, args.lam)
    print(model.dump())
    if args.check:
        rep = effective.spectrum_check(lat, args.g, args.lam)
        print(f"# spectrum check: {rep}")


def _cmd_sweep(args, **forced):
    cfg = _config_from_args(args, **forced)
    man = run_experiment(cfg, reuse=not args.recompute, log=lambda s: print(s, file=sys.stderr))
    for name in man["outputs"]:
        print(Path(cfg.output) / name)


def _cmd_collapse(args):
    err = "stderr" if args.kind == "m" else None
    column = {"fs": "value", "m": "mean_abs_m", "witness": "dw_dp"}[args.kind]
    data = load_dataset(args.inputs, column, args.size_key, err)
    kw = {"nu_bounds": tuple(args.nu_bounds)} if args.nu_bounds else {}
    res = collapse_dataset(data, args.kind, None if args.parity == "all" else args.parity, **kw)
    _emit(result_json(res, None, args.inputs), args.output)


def _cmd_fit(args):
    if args.result:
        d = json.loads(Path(args.result).read_text())
        key = "peaks" if args.kind == "asymptote" else "peak_values"
        pts = sorted((int(k), float(v)) for k, v in d[key].items())
    elif args.points:
        pts = sorted(
            (float(a), float(b)) for a, b in (s.split(":") for s in args.points.split(","))
        )
    else:
        raise ConfigError("give --points or --result")
    sizes, vals = zip(*pts)
    fn = {"power": scaling.fit_power_law, "log": scaling.fit_log_divergence,
          "asymptote": scaling.fit_asymptote}[args.kind]
    res = fn(sizes, vals)
    prov = {"inputs": {str(args.result): file_sha256(args.result)}} if args.result else {}
    _emit(res.to_json(prov) + "\n", args.output)


def _cmd_phase_boundary(args):
    if len(args.inputs) == 1 and args.inputs[0].endswith(".csv"):
        cols, _ = read_table(args.inputs[0])
        g, lam = cols["g"], cols["lambda_c"]
        err = cols.get("err")
    else:
        g, lam, err = phase_boundary_points(args.inputs)
    if err is not None and not np.all(np.isfinite(err)):
        err = None
    res = scaling.fit_phase_boundary(g, lam, err, args.form, args.cutoff)
    prov = {"inputs": {str(p): file_sha256(p) for p in args.inputs}}
    _emit(res.to_json(prov) + "\n", args.output)


def _cmd_verify(args):
    problems = verify_manifest(args.manifest)
    for p in problems:
        print(p, file=sys.stderr)
    if problems:
        return EXIT_INVALID
    print("manifest verified")
    return EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "lattice":
            _cmd_lattice(args)
        elif args.command == "map":
            _cmd_map(args)
        elif args.command == "ed-sweep":
            _cmd_sweep(args, method="ed")
        elif args.command == "qmc-sweep":
            _cmd_sweep(args, method="qmc", observable="m")
        elif args.command == "witness-sweep":
            _cmd_sweep(args, method="map_ed", observable="witness")
        elif args.command == "run":
            _cmd_sweep(args)
        elif args.command == "collapse":
            _cmd_collapse(args)
        elif args.command == "fit":
            _cmd_fit(args)
        elif args.command == "phase-boundary":
            _cmd_phase_boundary(args)
        elif args.command == "verify-manifest":
            return _cmd_verify(args)
    except (ConfigError, LatticeError, effective.MappingError, qmc.UnsupportedModelError,
            ed.SectorError, KeyError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (NumericalFailure, ed.ConvergenceError, ed.DegeneracyError, scaling.ScalingError,
            FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
