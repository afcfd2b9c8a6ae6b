"""Monte Carlo distribution checks: sup-increment tails, kernel density
estimates of increments and joint vectors, and positivity scans.

All constants in the underlying decay statements are existential, so every
check here is about functional form: which exponent fits, which scalings
hold.  Kernel densities use the reference bandwidth 1.06 sigma m^(-1/(4+D))
per coordinate with D the estimation-space dimension.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .config import ExperimentSpec, solve_member

__all__ = [
    "DensityEstimate",
    "PositivityResult",
    "TailCurve",
    "fit_tail_exponent",
    "kde_bivariate_decay",
    "kde_increment",
    "positivity_scan",
    "scaling_check_time",
    "sup_increment",
    "tail_curve_sup_increment",
    "upper_envelope_fit",
]

_MIN_TAIL_ENSEMBLE = 1_000
_MIN_KDE_ENSEMBLE = 10_000
_MIN_BIVARIATE_ENSEMBLE = 100_000
NEG_INF = float("-inf")


@dataclass(frozen=True)
class TailCurve:
    """Empirical exceedance curve of a sup-increment statistic."""

    xi_values: np.ndarray
    log_probs: np.ndarray
    ensemble_size: int
    interval: tuple[float, float]

    def __post_init__(self) -> None:
        xi = np.asarray(self.xi_values, dtype=float)
        lp = np.asarray(self.log_probs, dtype=float)
        if xi.ndim != 1 or xi.shape != lp.shape:
            raise ValueError("xi_values and log_probs must be matching 1-d arrays")
        if np.any(np.diff(xi) <= 0):
            raise ValueError("xi_values must be strictly increasing")
        finite = lp[np.isfinite(lp)]
        if np.any(np.diff(finite) > 1e-12):
            raise ValueError("log_probs must be non-increasing in xi")
        object.__setattr__(self, "xi_values", xi)
        object.__setattr__(self, "log_probs", lp)

    @property
    def all_sentinel(self) -> bool:
        return bool(np.all(np.isinf(self.log_probs)))


@dataclass(frozen=True)
class DensityEstimate:
    """Kernel density values at requested centers."""

    centers: np.ndarray
    values: np.ndarray
    bandwidth: float
    ensemble_size: int
    interval: tuple[float, float]

    def __post_init__(self) -> None:
        c = np.atleast_2d(np.asarray(self.centers, dtype=float))
        v = np.asarray(self.values, dtype=float)
        if v.shape[0] != c.shape[0] or np.any(v < 0):
            raise ValueError("values must be nonnegative, one per center")
        object.__setattr__(self, "centers", c)
        object.__setattr__(self, "values", v)


@dataclass(frozen=True)
class PositivityResult:
    min_value: float
    verdict: str  # "positive" | "untestable"
    lattice_points: int


def sup_increment(values: np.ndarray) -> float:
    """sup over pairs of |X_v - X_u| = diameter of the visited point set."""
    if values.shape[1] == 1:
        col = values[:, 0]
        return float(col.max() - col.min())
    try:
        from scipy.spatial import ConvexHull

        hull = values[ConvexHull(values).vertices]
    except Exception:  # degenerate (collinear) clouds
        hull = values
    diff = hull[:, None, :] - hull[None, :, :]
    return float(np.sqrt((diff**2).sum(axis=-1)).max())


def _ensemble_samples_at(
    spec: ExperimentSpec, times: tuple[float, ...], n_members: int | None = None
):
    """State samples at the requested times for each member, shape (m, len(times), d)."""
    grid = spec.grid
    idx = [int(round((t - grid.t_start) / grid.spacing)) for t in times]
    m = n_members or spec.ensemble
    out = np.empty((m, len(times), spec.dim))
    for k in range(m):
        sol = solve_member(spec, k)
        out[k] = sol.values[idx]
    return out


def tail_curve_sup_increment(
    spec: ExperimentSpec,
    interval: tuple[float, float],
    xi_grid: np.ndarray | None = None,
) -> TailCurve:
    """Empirical P(sup |X_v - X_u| >= xi) over [interval] from the ensemble.

    With xi_grid omitted, a quantile ladder of the realized statistics is
    used.  Exceedance zero yields the -inf sentinel; an all-sentinel curve is
    reported with a warning (the xi grid was too coarse).
    """
    if spec.ensemble < _MIN_TAIL_ENSEMBLE:
        raise ValueError(f"tail curves need an ensemble of at least {_MIN_TAIL_ENSEMBLE}")
    sups = np.empty(spec.ensemble)
    for k in range(spec.ensemble):
        sol = solve_member(spec, k).restrict(*interval)
        sups[k] = sup_increment(sol.values)
    if xi_grid is None:
        qs = np.linspace(0.05, 0.99, 24)
        xi_grid = np.unique(np.quantile(sups, qs))
    xi = np.asarray(xi_grid, dtype=float)
    probs = (sups[None, :] >= xi[:, None]).mean(axis=1)
    with np.errstate(divide="ignore"):
        log_probs = np.log(probs)
    curve = TailCurve(xi, log_probs, spec.ensemble, interval)
    if curve.all_sentinel:
        warnings.warn("no exceedances at any xi; the xi grid is too coarse")
    return curve


def fit_tail_exponent(
    curve: TailCurve, candidate_exponents: list[float]
) -> tuple[float, list[float], list[float]]:
    """Per-candidate linear fit of log_prob against xi^a; best = argmax R^2."""
    usable = np.isfinite(curve.log_probs)
    if usable.sum() < 5:
        raise ValueError("need at least 5 finite curve points")
    xi = curve.xi_values[usable]
    y = curve.log_probs[usable]
    if np.ptp(y) == 0.0:
        raise ValueError("degenerate curve: all probabilities equal")
    slopes, r2s = [], []
    for a in candidate_exponents:
        x = xi**a
        slope, intercept = np.polyfit(x, y, 1)
        resid = y - (slope * x + intercept)
        r2s.append(1.0 - float((resid**2).sum()) / float(((y - y.mean()) ** 2).sum()))
        slopes.append(float(slope))
    best = candidate_exponents[int(np.argmax(r2s))]
    return best, slopes, r2s


def scaling_check_time(
    spec: ExperimentSpec,
    intervals: list[tuple[float, float]],
    xi_fixed: float,
) -> tuple[list[tuple[float, float]], float]:
    """Exceedance at fixed xi across intervals sharing a start point.

    Returns ((t-s, log_prob) pairs, slope of log_prob against log(t-s)); the
    association is expected positive (longer interval, fatter tail).
    """
    starts = {s for s, _ in intervals}
    if len(starts) != 1:
        raise ValueError("intervals must share their start point")
    if spec.ensemble < _MIN_TAIL_ENSEMBLE:
        raise ValueError(f"tail curves need an ensemble of at least {_MIN_TAIL_ENSEMBLE}")
    sups = {iv: np.empty(spec.ensemble) for iv in intervals}
    for k in range(spec.ensemble):
        sol = solve_member(spec, k)
        for iv in intervals:
            sups[iv][k] = sup_increment(sol.restrict(*iv).values)
    pairs = []
    for s, t in intervals:
        p = float((sups[(s, t)] >= xi_fixed).mean())
        pairs.append((t - s, math.log(p) if p > 0 else NEG_INF))
    finite = [(w, lp) for w, lp in pairs if math.isfinite(lp)]
    if len(finite) >= 2:
        xs = np.log([w for w, _ in finite])
        ys = np.array([lp for _, lp in finite])
        slope = float(np.polyfit(xs, ys, 1)[0])
    else:
        warnings.warn("too few finite exceedances for a scaling slope")
        slope = math.nan
    return pairs, slope


def _bandwidths(samples: np.ndarray) -> np.ndarray:
    m, dim = samples.shape
    sigma = samples.std(axis=0, ddof=1)
    if np.any(sigma == 0.0):
        raise ValueError("bandwidth collapse: a coordinate has zero spread")
    return 1.06 * sigma * m ** (-1.0 / (4 + dim))


def _kde_at(samples: np.ndarray, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Product-Gaussian KDE of samples evaluated at points; returns (values, bandwidths)."""
    b = _bandwidths(samples)
    norm = float(np.prod(b)) * (2 * math.pi) ** (samples.shape[1] / 2.0)
    vals = np.empty(points.shape[0])
    block = max(1, int(2**22) // samples.shape[0])
    for a in range(0, points.shape[0], block):
        z = (points[a : a + block, None, :] - samples[None, :, :]) / b
        vals[a : a + block] = np.exp(-0.5 * (z**2).sum(axis=-1)).mean(axis=1) / norm
    return vals, b


def kde_increment(
    spec: ExperimentSpec,
    interval: tuple[float, float],
    centers: np.ndarray,
) -> DensityEstimate:
    """Kernel density of X_t - X_s at the given centers."""
    s, t = interval
    if s < 0.1 - 1e-12:
        raise ValueError("increment densities are estimated away from 0 (s >= 0.1)")
    if spec.ensemble < _MIN_KDE_ENSEMBLE:
        raise ValueError(f"kde_increment needs an ensemble of at least {_MIN_KDE_ENSEMBLE}")
    samples = _ensemble_samples_at(spec, (s, t))
    inc = samples[:, 1, :] - samples[:, 0, :]
    pts = np.atleast_2d(np.asarray(centers, dtype=float))
    if pts.shape[1] != spec.dim:
        pts = pts.reshape(-1, spec.dim)
    vals, b = _kde_at(inc, pts)
    return DensityEstimate(pts, vals, float(np.mean(b)), spec.ensemble, interval)


def positivity_scan(
    spec: ExperimentSpec,
    t: float,
    window: tuple[float, float],
    lattice_per_dim: int | None = None,
) -> PositivityResult:
    """Minimum KDE value of X_t over a lattice filling the window box.

    Too small an ensemble, too few samples near the window, or full KDE
    underflow make the scan untestable rather than failed.
    """
    if t < 0.1:
        raise ValueError("positivity scans require t >= 0.1")
    d = spec.dim
    if lattice_per_dim is None:
        lattice_per_dim = max(2, int(10_000 ** (1.0 / d)))
    if lattice_per_dim**d > 10_000:
        raise ValueError("lattice exceeds 10^4 points")
    axes = [np.linspace(window[0], window[1], lattice_per_dim)] * d
    mesh = np.meshgrid(*axes, indexing="ij")
    lattice = np.column_stack([m.ravel() for m in mesh])
    if spec.ensemble < 100:
        return PositivityResult(math.nan, "untestable", lattice.shape[0])
    samples = _ensemble_samples_at(spec, (t,))[:, 0, :]
    b = _bandwidths(samples)
    near = np.all(
        (samples >= window[0] - 3 * b) & (samples <= window[1] + 3 * b), axis=1
    )
    if near.sum() < 10:
        return PositivityResult(0.0, "untestable", lattice.shape[0])
    vals, _ = _kde_at(samples, lattice)
    mn = float(vals.min())
    verdict = "positive" if mn > 0.0 else "untestable"
    return PositivityResult(mn, verdict, lattice.shape[0])


def kde_bivariate_decay(
    spec: ExperimentSpec,
    s: float,
    t: float,
    offsets: np.ndarray,
) -> list[tuple[float, float]]:
    """Joint KDE of (X_s, X_t) at pairs (z, z + offset), z the median of X_s.

    Returns (|offset|, joint density) pairs, the raw material for decay
    profiles in |offset|^(2 gamma).
    """
    if not (0.1 <= s < t):
        raise ValueError("need 0.1 <= s < t")
    if spec.ensemble < _MIN_BIVARIATE_ENSEMBLE:
        raise ValueError(
            f"kde_bivariate_decay needs an ensemble of at least {_MIN_BIVARIATE_ENSEMBLE}"
        )
    samples = _ensemble_samples_at(spec, (s, t))
    joint = samples.reshape(samples.shape[0], 2 * spec.dim)
    z1 = np.median(samples[:, 0, :], axis=0)
    offs = np.atleast_2d(np.asarray(offsets, dtype=float))
    if offs.shape[1] != spec.dim:
        offs = offs.reshape(-1, spec.dim)
    points = np.column_stack([np.tile(z1, (offs.shape[0], 1)), z1[None, :] + offs])
    vals, _ = _kde_at(joint, points)
    return [
        (float(np.sqrt((off**2).sum())), float(v)) for off, v in zip(offs, vals)
    ]


def upper_envelope_fit(
    z_norms: np.ndarray,
    values: np.ndarray,
    exponent: float,
    n_bins: int = 10,
) -> tuple[float, float, float]:
    """Regression of the log upper-decile envelope against |z|^exponent.

    Decay statements bound densities from above, so within each |z| bin only
    the top decile of values is informative; returns (slope, intercept, r2).
    """
    z = np.asarray(z_norms, dtype=float)
    v = np.asarray(values, dtype=float)
    keep = v > 0
    z, v = z[keep], v[keep]
    edges = np.linspace(z.min(), z.max(), n_bins + 1)
    xs, ys = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        sel = (z >= lo) & (z <= hi)
        if sel.sum() < 1:
            continue
        xs.append(float(np.mean(z[sel] ** exponent)))
        ys.append(float(np.log(np.quantile(v[sel], 0.9))))
    if len(xs) < 3:
        raise ValueError("too few populated bins for an envelope fit")
    xs = np.array(xs)
    ys = np.array(ys)
    slope, intercept = np.polyfit(xs, ys, 1)
    resid = ys - (slope * xs + intercept)
    r2 = 1.0 - float((resid**2).sum()) / float(((ys - ys.mean()) ** 2).sum())
    return float(slope), float(intercept), r2
