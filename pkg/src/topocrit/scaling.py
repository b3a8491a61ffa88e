"""Finite-size scaling: data collapse, divergence fits and extrapolation.

A collapse rescales every finite-size series with trial exponents, fits one
degree-8 polynomial through all rescaled points and scores the exponents by
the fit residual. The residual is minimized with Nelder-Mead (parameters
reflected into their bounds) started from nine grid points.
"""

from __future__ import annotations

import hashlib
import json
import math
import warnings
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial import polynomial as P
from scipy.optimize import OptimizeWarning, curve_fit, minimize

POLY_DEGREE = 8
NU_BOUNDS = (0.622, 1.0)
BETA_BOUNDS = (0.125, 0.314)
N_STARTS = 9
BOUND_TOL = 1e-4


class ScalingError(ValueError):
    """Input unsuitable for the requested fit."""


@dataclass
class Series:
    """One finite-size series: parameter values, observable and errors."""

    size: int
    p: np.ndarray
    value: np.ndarray
    stderr: np.ndarray | None = None

    def __post_init__(self):
        self.p = np.asarray(self.p, dtype=float)
        self.value = np.asarray(self.value, dtype=float)
        if self.stderr is not None:
            self.stderr = np.asarray(self.stderr, dtype=float)
        order = np.argsort(self.p)
        self.p = self.p[order]
        self.value = self.value[order]
        if self.stderr is not None:
            self.stderr = self.stderr[order]


@dataclass
class ScalingDataset:
    series: list
    meta: dict = field(default_factory=dict)

    @property
    def sizes(self) -> list[int]:
        return [s.size for s in self.series]

    def validate(self, min_sizes: int = 3):
        if len(set(self.sizes)) < min_sizes:
            raise ScalingError(f"need at least {min_sizes} distinct sizes")

    def filtered(self, parity: str | None) -> "ScalingDataset":
        """Keep only odd or even sizes ('odd', 'even' or None)."""
        if parity is None:
            return self
        want = 1 if parity == "odd" else 0
        return ScalingDataset([s for s in self.series if s.size % 2 == want], dict(self.meta))


@dataclass
class ScalingResult:
    """Fitted scaling parameters; ``residual`` is always reported."""

    kind: str
    residual: float
    nu: float | None = None
    beta: float | None = None
    p_c: float | None = None
    alpha: float | None = None
    delta: float | None = None
    k: float | None = None
    k_err: float | None = None
    peaks: dict = field(default_factory=dict)
    peak_values: dict = field(default_factory=dict)
    uncertainties: dict = field(default_factory=dict)
    bounds: dict = field(default_factory=dict)
    flags: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    def to_json(self, provenance: dict | None = None) -> str:
        d = asdict(self)
        d["peaks"] = {str(k): v for k, v in self.peaks.items()}
        d["peak_values"] = {str(k): v for k, v in self.peak_values.items()}
        if provenance:
            d["provenance"] = provenance
        return json.dumps(_finite(d), indent=2, sort_keys=True)


def _finite(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    if isinstance(obj, dict):
        return {k: _finite(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return _finite(obj.item())
    return obj


def file_hash(path) -> str:
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


# --------------------------------------------------------------------------
# peaks
# --------------------------------------------------------------------------


def peak_location(p, v) -> tuple[float, float]:
    """Sub-grid maximum from the parabola through the top three samples.

    Raises
    ------
    ScalingError
        If the discrete maximum sits on the first or last sample.
    """
    p = np.asarray(p, dtype=float)
    v = np.asarray(v, dtype=float)
    ok = np.isfinite(v)
    p, v = p[ok], v[ok]
    if p.size < 3:
        raise ScalingError("need at least three samples to locate a peak")
    k = int(np.argmax(v))
    if k == 0 or k == p.size - 1:
        raise ScalingError("maximum on the edge of the grid: no resolved peak")
    x = p[k - 1:k + 2]
    y = v[k - 1:k + 2]
    c2, c1, c0 = np.polyfit(x, y, 2)
    if c2 >= 0:
        return float(p[k]), float(v[k])
    xm = -c1 / (2 * c2)
    xm = min(max(xm, x[0]), x[2])
    return float(xm), float(c0 + c1 * xm + c2 * xm * xm)


# --------------------------------------------------------------------------
# polynomial collapse machinery
# --------------------------------------------------------------------------


def polynomial_residual(x, y, weights=None, degree: int = POLY_DEGREE) -> float:
    """Mean (weighted) squared deviation from the least-squares polynomial."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size <= degree + 1:
        raise ScalingError("not enough points for the scaling polynomial")
    scale = max(np.max(np.abs(x)), 1e-300)
    xs = x / scale
    if weights is None:
        coef = P.polyfit(xs, y, degree)
        r = y - P.polyval(xs, coef)
        return float(np.mean(r * r))
    sw = np.sqrt(np.asarray(weights, dtype=float))
    coef = P.polyfit(xs, y, degree, w=sw)
    r = (y - P.polyval(xs, coef)) * sw
    return float(np.sum(r * r) / max(x.size - degree - 1, 1))


def _reflect(x, lo, hi):
    """Fold ``x`` into ``[lo, hi]`` by mirror reflection."""
    width = np.maximum(hi - lo, 1e-300)
    t = np.mod(x - lo, 2 * width)
    return lo + np.where(t > width, 2 * width - t, t)


def _start_points(bounds, guess=None, n: int = N_STARTS) -> list[np.ndarray]:
    lo = np.array([b[0] for b in bounds])
    hi = np.array([b[1] for b in bounds])
    mid = (lo + hi) / 2 if guess is None else np.asarray(guess, dtype=float)
    if len(bounds) == 1:
        return [np.array([lo[0] + (k + 0.5) * (hi[0] - lo[0]) / n]) for k in range(n)]
    side = int(round(math.sqrt(n)))
    pts = []
    for a in range(side):
        for b in range(side):
            x = mid.copy()
            x[0] = lo[0] + (a + 0.5) * (hi[0] - lo[0]) / side
            x[1] = lo[1] + (b + 0.5) * (hi[1] - lo[1]) / side
            pts.append(x)
    return pts


def bounded_minimize(func: Callable, bounds, guess=None, n_starts: int = N_STARTS):
    """Multistart Nelder-Mead with reflection into ``bounds``.

    Returns
    -------
    x, fx, at_bound : ndarray, float, list of bool
    """
    lo = np.array([b[0] for b in bounds], dtype=float)
    hi = np.array([b[1] for b in bounds], dtype=float)
    wrapped = lambda x: func(_reflect(np.asarray(x, dtype=float), lo, hi))
    best = None
    for x0 in _start_points(bounds, guess, n_starts):
        res = minimize(wrapped, x0, method="Nelder-Mead",
                       options={"xatol": 1e-7, "fatol": 1e-14, "maxiter": 4000})
        x = _reflect(res.x, lo, hi)
        fx = float(func(x))
        key = (fx, *x)
        if best is None or key < best[0]:
            best = (key, x, fx)
    x = best[1]
    span = hi - lo
    at_bound = [bool(min(x[i] - lo[i], hi[i] - x[i]) <= BOUND_TOL * max(span[i], 1e-12))
                for i in range(len(x))]
    return x, best[2], at_bound


# --------------------------------------------------------------------------
# collapses
# --------------------------------------------------------------------------


def _peaks(dataset: ScalingDataset):
    peaks, values = {}, {}
    for s in dataset.series:
        try:
            peaks[s.size], values[s.size] = peak_location(s.p, s.value)
        except ScalingError as exc:
            raise ScalingError(f"size {s.size}: {exc}") from exc
    return peaks, values


def _attach_asymptote(result: ScalingResult, fit_extrapolation: bool):
    if not fit_extrapolation or len(result.peaks) < 3:
        return result
    sizes = sorted(result.peaks)
    try:
        a = fit_asymptote(sizes, [result.peaks[s] for s in sizes])
    except ScalingError as exc:
        result.flags.append(f"asymptote: {exc}")
        return result
    result.p_c, result.alpha, result.delta = a.p_c, a.alpha, a.delta
    result.uncertainties.update({f"asymptote_{k}": v for k, v in a.uncertainties.items()})
    result.extra["asymptote_residual"] = a.residual
    result.flags.extend(a.flags)
    return result


def collapse_fs(dataset: ScalingDataset, nu_bounds=NU_BOUNDS, window: float | None = None,
                fit_extrapolation: bool = True) -> ScalingResult:
    """Collapse ``(chi_max - chi)/chi`` against ``D**nu (p - p_max)``."""
    dataset.validate()
    peaks, vals = _peaks(dataset)
    xs, ys = [], []
    for s in dataset.series:
        sel = np.isfinite(s.value) & (s.value > 0)
        if window is not None:
            sel &= np.abs(s.p - peaks[s.size]) <= window
        xs.append((s.size, s.p[sel] - peaks[s.size]))
        ys.append((vals[s.size] - s.value[sel]) / s.value[sel])
    y = np.concatenate(ys)

    def cost(theta):
        nu = theta[0]
        x = np.concatenate([D**nu * dp for D, dp in xs])
        return polynomial_residual(x, y)

    theta, res, at_bound = bounded_minimize(cost, [nu_bounds])
    out = ScalingResult("fs", res, nu=float(theta[0]), peaks=peaks, peak_values=vals,
                        bounds={"nu": list(nu_bounds)})
    if at_bound[0]:
        out.flags.append("nu at search bound")
    return _attach_asymptote(out, fit_extrapolation)


def collapse_witness(dataset: ScalingDataset, nu_bounds=NU_BOUNDS, window: float | None = None,
                     fit_extrapolation: bool = True) -> ScalingResult:
    """Collapse ``exp(d - d_max)`` against ``D**(1/nu) (p - p_max)``."""
    dataset.validate()
    peaks, vals = _peaks(dataset)
    xs, ys = [], []
    for s in dataset.series:
        sel = np.isfinite(s.value)
        if window is not None:
            sel &= np.abs(s.p - peaks[s.size]) <= window
        xs.append((s.size, s.p[sel] - peaks[s.size]))
        ys.append(np.exp(s.value[sel] - vals[s.size]))
    y = np.concatenate(ys)

    def cost(theta):
        nu = theta[0]
        x = np.concatenate([D ** (1.0 / nu) * dp for D, dp in xs])
        return polynomial_residual(x, y)

    theta, res, at_bound = bounded_minimize(cost, [nu_bounds])
    out = ScalingResult("witness", res, nu=float(theta[0]), peaks=peaks, peak_values=vals,
                        bounds={"nu": list(nu_bounds)})
    if at_bound[0]:
        out.flags.append("nu at search bound")
    return _attach_asymptote(out, fit_extrapolation)


def collapse_m(dataset: ScalingDataset, nu_bounds=NU_BOUNDS, beta_bounds=BETA_BOUNDS,
               pc_bounds: tuple | None = None) -> ScalingResult:
    """Fit ``m = D**(-beta/nu) F(D**(1/nu) (p - p_c))`` over all sizes.

    Points carry weights ``1/stderr**2`` (after rescaling) when errors are
    present; the reported residual is chi-squared per degree of freedom.
    """
    dataset.validate()
    ps = np.concatenate([s.p for s in dataset.series])
    if pc_bounds is None:
        pc_bounds = (float(ps.min()), float(ps.max()))
    weighted = all(s.stderr is not None for s in dataset.series)
    data = []
    for s in dataset.series:
        err = s.stderr if weighted else None
        data.append((s.size, s.p, s.value, err))

    def cost(theta):
        nu, beta, pc = theta
        x = np.concatenate([D ** (1.0 / nu) * (p - pc) for D, p, _, _ in data])
        y = np.concatenate([v * D ** (beta / nu) for D, _, v, _ in data])
        if weighted:
            e = np.concatenate([np.maximum(err, 1e-12) * D ** (beta / nu) for D, _, _, err in data])
            return polynomial_residual(x, y, 1.0 / e**2)
        return polynomial_residual(x, y)

    bounds = [nu_bounds, beta_bounds, pc_bounds]
    guess = [np.mean(nu_bounds), np.mean(beta_bounds), np.mean(pc_bounds)]
    best = None
    # the critical point gets its own 9-point scan; exponents use the 3x3 grid
    for pc0 in np.linspace(pc_bounds[0], pc_bounds[1], N_STARTS + 2)[1:-1]:
        guess[2] = pc0
        theta, res, at_bound = bounded_minimize(cost, bounds, guess)
        key = (res, theta[0], theta[2])
        if best is None or key < best[0]:
            best = (key, theta, res, at_bound)
    _, theta, res, at_bound = best
    out = ScalingResult(
        "magnetization",
        res,
        nu=float(theta[0]),
        beta=float(theta[1]),
        p_c=float(theta[2]),
        bounds={"nu": list(nu_bounds), "beta": list(beta_bounds), "p_c": list(pc_bounds)},
        extra={"weighted": weighted},
    )
    for name, hit in zip(("nu", "beta", "p_c"), at_bound):
        if hit:
            out.flags.append(f"{name} at search bound")
    n_pts = sum(s.p.size for s in dataset.series)
    out.uncertainties.update(
        _curvature_errors(cost, theta, bounds, res, max(n_pts - POLY_DEGREE - 1, 1))
    )
    return out


def _curvature_errors(cost, theta, bounds, fmin, dof: int) -> dict:
    """Single-parameter errors from the curvature of ``dof * cost``.

    Uses the ``delta chi^2 = 1`` rule, inflated by ``sqrt(chi^2/dof)`` when
    the fit is worse than its error bars. Parameters at a bound use a
    one-sided stencil.
    """
    out = {}
    names = ("nu", "beta", "p_c")
    for i, name in enumerate(names[: len(theta)]):
        lo, hi = bounds[i]
        h = 1e-3 * (hi - lo)
        if theta[i] + 2 * h <= hi:
            offs = (0.0, h, 2 * h) if theta[i] - h < lo else (-h, 0.0, h)
        else:
            offs = (-2 * h, -h, 0.0)
        vals = []
        for o in offs:
            t = np.array(theta, dtype=float)
            t[i] += o
            vals.append(fmin if o == 0.0 else cost(t))
        curv = dof * (vals[0] - 2 * vals[1] + vals[2]) / h**2
        if curv > 0:
            out[name] = float(math.sqrt(2.0 / curv) * math.sqrt(max(fmin, 1.0)))
        else:
            out[name] = float("nan")
    return out


# --------------------------------------------------------------------------
# fits
# --------------------------------------------------------------------------


def _linear_fit(x, y, w=None):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    A = np.column_stack([x, np.ones_like(x)])
    if w is not None:
        sw = np.sqrt(w)
        A = A * sw[:, None]
        y = y * sw
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    r = y - A @ coef
    dof = max(x.size - 2, 1)
    s2 = float(r @ r) / dof
    cov = np.linalg.inv(A.T @ A) * (s2 if w is None else max(s2, 0.0))
    return coef, np.sqrt(np.diag(cov)), float(r @ r)


def fit_power_law(sizes, values) -> ScalingResult:
    """Slope ``k`` of ``log(value)`` against ``log(size)``."""
    sizes = np.asarray(sizes, dtype=float)
    values = np.asarray(values, dtype=float)
    if sizes.size < 3:
        raise ScalingError("need at least three sizes")
    if np.any(values <= 0) or np.any(sizes <= 0):
        raise ScalingError("power-law fit needs positive values")
    coef, err, rss = _linear_fit(np.log(sizes), np.log(values))
    return ScalingResult("power_law", rss, k=float(coef[0]), k_err=float(err[0]),
                         extra={"intercept": float(coef[1]), "intercept_err": float(err[1])})


def fit_log_divergence(sizes, values) -> ScalingResult:
    """Slope ``k`` of ``value = k ln(size) + c``."""
    sizes = np.asarray(sizes, dtype=float)
    values = np.asarray(values, dtype=float)
    if sizes.size < 3:
        raise ScalingError("need at least three sizes")
    if np.any(sizes <= 0) or not np.all(np.isfinite(values)):
        raise ScalingError("log fit needs positive sizes and finite values")
    coef, err, rss = _linear_fit(np.log(sizes), values)
    return ScalingResult("log_divergence", rss, k=float(coef[0]), k_err=float(err[0]),
                         extra={"intercept": float(coef[1]), "intercept_err": float(err[1])})


def fit_asymptote(sizes, p_max, delta_bounds=(0.05, 8.0)) -> ScalingResult:
    """Least squares for ``p_max = p_c + alpha / size**delta``.

    ``delta`` is profiled on a grid (the model is linear in ``p_c, alpha``
    at fixed ``delta``) and then refined jointly.
    """
    sizes = np.asarray(sizes, dtype=float)
    p_max = np.asarray(p_max, dtype=float)
    if sizes.size < 3:
        raise ScalingError("need at least three sizes")

    def profile(delta):
        A = np.column_stack([np.ones_like(sizes), sizes**-delta])
        coef, *_ = np.linalg.lstsq(A, p_max, rcond=None)
        r = p_max - A @ coef
        return float(r @ r), coef

    grid = np.linspace(delta_bounds[0], delta_bounds[1], 800)
    rss = [profile(d)[0] for d in grid]
    d0 = float(grid[int(np.argmin(rss))])
    flags = []
    model = lambda s, pc, a, d: pc + a * s**-d
    _, (pc0, a0) = profile(d0)
    unc = {"p_c": float("nan"), "alpha": float("nan"), "delta": float("nan")}
    try:
        with warnings.catch_warnings():
            # an exact three-point fit has no covariance; flagged below
            warnings.simplefilter("ignore", OptimizeWarning)
            popt, pcov = curve_fit(
                model, sizes, p_max, p0=[pc0, a0, d0],
                bounds=([-np.inf, -np.inf, delta_bounds[0]], [np.inf, np.inf, delta_bounds[1]]),
                maxfev=20000,
            )
        if sizes.size > 3 and np.all(np.isfinite(pcov)):
            unc = dict(zip(("p_c", "alpha", "delta"), map(float, np.sqrt(np.diag(pcov)))))
    except (RuntimeError, ValueError):
        popt = np.array([pc0, a0, d0])
        flags.append("joint refinement failed; profiled values reported")
    res = float(np.sum((p_max - model(sizes, *popt)) ** 2))
    if min(popt[2] - delta_bounds[0], delta_bounds[1] - popt[2]) <= 1e-3:
        flags.append("delta at search bound")
    if sizes.size == 3:
        flags.append("three points for three parameters: exact fit, no uncertainty")
    return ScalingResult("asymptote", res, p_c=float(popt[0]), alpha=float(popt[1]),
                         delta=float(popt[2]), uncertainties=unc, flags=flags,
                         bounds={"delta": list(delta_bounds)})


def fit_phase_boundary(g, lam, lam_err=None, form: str = "quadratic",
                       cutoff: float = 0.0) -> ScalingResult:
    """Polynomial ``lam(g)`` through critical points with ``g, lam >= cutoff``.

    Returns coefficients in increasing order in ``extra['coefficients']``
    with standard errors in ``extra['errors']``.
    """
    g = np.asarray(g, dtype=float)
    lam = np.asarray(lam, dtype=float)
    err = None if lam_err is None else np.asarray(lam_err, dtype=float)
    keep = (g >= cutoff) & (lam >= cutoff)
    g, lam = g[keep], lam[keep]
    if err is not None:
        err = err[keep]
    deg = {"quadratic": 2, "linear": 1}.get(form)
    if deg is None:
        raise ValueError(f"unknown form {form!r}")
    if g.size < deg + 1:
        raise ScalingError("fewer points than coefficients")
    V = np.vander(g, deg + 1, increasing=True)
    W = np.ones_like(g) if err is None else 1.0 / np.maximum(err, 1e-12) ** 2
    A = V * np.sqrt(W)[:, None]
    b = lam * np.sqrt(W)
    coef, *_ = np.linalg.lstsq(A, b, rcond=None)
    r = b - A @ coef
    rss = float(r @ r)
    dof = g.size - deg - 1
    cov = np.linalg.pinv(A.T @ A)
    if err is None or dof > 0:
        scale = rss / dof if dof > 0 else float("nan")
        cov = cov * scale
    errs = np.sqrt(np.abs(np.diag(cov)))
    return ScalingResult("phase_boundary", rss,
                         extra={"coefficients": coef.tolist(), "errors": errs.tolist(),
                                "form": form, "n_points": int(g.size), "cutoff": cutoff})


def richardson_check(func: Callable[[float], float], step: float) -> float:
    """Relative change of ``func`` when its step argument is halved."""
    a = func(step)
    b = func(step / 2)
    return abs(a - b) / max(abs(b), 1e-300)
