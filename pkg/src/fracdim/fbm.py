"""Fractional Brownian motion synthesis and covariance structure.

Exact Gaussian samplers (dense Cholesky and circulant embedding), the fBm
covariance function, the Volterra kernel representation, uniform time grids,
and the shared on-disk path formats used by the rest of the package.
"""
from __future__ import annotations

import functools
import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import BinaryIO, TextIO

import numpy as np
from scipy import integrate, special

__all__ = [
    "CHOLESKY_MAX_N",
    "CovarianceGrid",
    "HurstParam",
    "SamplePath",
    "SynthesisError",
    "TimeGrid",
    "build_covariance_grid",
    "component_rng",
    "covariance",
    "empirical_holder_exponent",
    "generate_cholesky",
    "generate_circulant",
    "kernel_kh",
    "path_to_csv",
    "read_path",
    "write_path",
]

CHOLESKY_MAX_N = 8192
#: smallest eigenvalue tolerated before any jitter is attempted
TOL_PSD = 1e-10
#: tolerated relative mass of clipped negative circulant eigenvalues
NEG_EIG_TOL = 1e-8
_JITTER_ROUNDS = 3
_JITTER_BASE = 1e-12

PATH_MAGIC = b"FRD1"
PATH_VERSION = 1
_HEADER = struct.Struct("<IdIQddQ")  # version, hurst, d, n_points, t_start, t_end, seed


class SynthesisError(RuntimeError):
    """Exact Gaussian synthesis could not be completed."""


@dataclass(frozen=True)
class HurstParam:
    """Hurst regularity index, restricted to the liftable range (1/4, 1)."""

    value: float

    def __post_init__(self) -> None:
        if not (0.25 < self.value < 1.0):
            raise ValueError(f"hurst must lie in (0.25, 1), got {self.value}")


def _hurst_value(h: HurstParam | float) -> float:
    if isinstance(h, HurstParam):
        return h.value
    return HurstParam(float(h)).value


@dataclass(frozen=True)
class TimeGrid:
    """Uniform time grid with n_points inclusive endpoints."""

    n_points: int
    t_start: float = 0.0
    t_end: float = 1.0

    def __post_init__(self) -> None:
        if self.n_points < 2:
            raise ValueError("grid needs at least two points")
        if not (math.isfinite(self.t_start) and math.isfinite(self.t_end)):
            raise ValueError("grid endpoints must be finite")
        if self.t_start < 0 or self.t_end <= self.t_start:
            raise ValueError("grid requires 0 <= t_start < t_end")

    @property
    def spacing(self) -> float:
        return (self.t_end - self.t_start) / (self.n_points - 1)

    @property
    def points(self) -> np.ndarray:
        pts = self.t_start + self.spacing * np.arange(self.n_points)
        pts[-1] = self.t_end
        return pts


@dataclass(frozen=True)
class SamplePath:
    """A d-dimensional discretized path on a uniform grid.

    ``values`` has one row per grid point.  ``hurst`` and ``seed`` are
    provenance tags carried through transformations where they stay valid.
    """

    grid: TimeGrid
    values: np.ndarray
    hurst: HurstParam | None = None
    seed: int | None = None

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        if v.ndim != 2 or v.shape[0] != self.grid.n_points:
            raise ValueError(
                f"values must be (n_points, d), got {v.shape} for n_points={self.grid.n_points}"
            )
        if not np.all(np.isfinite(v)):
            raise ValueError("path values must be finite")
        object.__setattr__(self, "values", v)

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    def restrict(self, t_lo: float, t_hi: float) -> "SamplePath":
        """Contiguous sub-path with grid times inside [t_lo, t_hi]."""
        pts = self.grid.points
        mask = (pts >= t_lo - 1e-12) & (pts <= t_hi + 1e-12)
        idx = np.nonzero(mask)[0]
        if idx.size < 2:
            raise ValueError("restriction keeps fewer than two grid points")
        sub = TimeGrid(idx.size, float(pts[idx[0]]), float(pts[idx[-1]]))
        return SamplePath(sub, self.values[idx], hurst=self.hurst, seed=self.seed)

    def decimate(self, factor: int) -> "SamplePath":
        """Keep every factor-th point; factor must divide the interval count."""
        if factor < 1 or (self.grid.n_points - 1) % factor:
            raise ValueError("factor must divide the number of grid intervals")
        sub = TimeGrid((self.grid.n_points - 1) // factor + 1, self.grid.t_start, self.grid.t_end)
        return SamplePath(sub, self.values[::factor], hurst=self.hurst, seed=self.seed)


@dataclass(frozen=True)
class CovarianceGrid:
    """Covariance matrix of one fBm component over the positive grid points."""

    grid: TimeGrid
    entries: np.ndarray

    def __post_init__(self) -> None:
        m = np.asarray(self.entries, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] != self.grid.n_points:
            raise ValueError("entries must be square and match the grid")
        if not np.array_equal(m, m.T):
            raise ValueError("covariance matrix must be exactly symmetric")
        object.__setattr__(self, "entries", m)


def component_rng(seed: int, component: int = 0) -> np.random.Generator:
    """Counter-based Philox stream for one path component.

    Streams keyed by distinct (seed, component) pairs are independent, which
    keeps parallel ensembles reproducible regardless of execution order.
    """
    key = np.array([seed % 2**64, component % 2**64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def covariance(s: float, t: float, h: HurstParam | float) -> float:
    """fBm covariance (s^2H + t^2H - |t-s|^2H) / 2 of one component."""
    H = _hurst_value(h)
    if not (math.isfinite(s) and math.isfinite(t)) or s < 0 or t < 0:
        raise ValueError("times must be finite and nonnegative")
    e = 2.0 * H
    return 0.5 * (s**e + t**e - abs(t - s) ** e)


def kernel_kh(t: float, s: float, h: HurstParam | float) -> float:
    """Volterra kernel K_H(t, s) of the moving-average representation, 0 < s < t.

    Normalized so that int_0^(s^t) K_H(t,u) K_H(s,u) du reproduces covariance(s, t).
    The H = 1/2 kernel is the plain indicator of u < t.
    """
    H = _hurst_value(h)
    if not (0.0 < s < t):
        raise ValueError("kernel requires 0 < s < t")
    if H == 0.5:
        return 1.0
    if H > 0.5:
        c = math.sqrt(H * (2.0 * H - 1.0) / special.beta(2.0 - 2.0 * H, H - 0.5))
        # integrand (u-s)^(H-3/2) u^(H-1/2); the algebraic endpoint weight is exact in QUADPACK
        integral, _ = integrate.quad(
            lambda u: u ** (H - 0.5), s, t, weight="alg", wvar=(H - 1.5, 0.0)
        )
        return c * s ** (0.5 - H) * integral
    c = math.sqrt(2.0 * H / ((1.0 - 2.0 * H) * special.beta(1.0 - 2.0 * H, H + 0.5)))
    head = c * (s / t) ** (0.5 - H) * (t - s) ** (H - 0.5)
    integral, _ = integrate.quad(
        lambda u: u ** (H - 1.5), s, t, weight="alg", wvar=(H - 0.5, 0.0)
    )
    return head + c * (0.5 - H) * s ** (0.5 - H) * integral


def _positive_subgrid(grid: TimeGrid) -> tuple[TimeGrid, bool]:
    """Grid without the pinned t=0 point; flags whether a zero row was dropped."""
    if grid.t_start == 0.0:
        return TimeGrid(grid.n_points - 1, grid.spacing, grid.t_end), True
    return grid, False


def _covariance_matrix(pos: np.ndarray, H: float) -> np.ndarray:
    e = 2.0 * H
    p = pos**e
    return 0.5 * (p[:, None] + p[None, :] - np.abs(pos[:, None] - pos[None, :]) ** e)


@functools.lru_cache(maxsize=16)
def _grid_factorization(grid: TimeGrid, H: float) -> tuple[np.ndarray, np.ndarray]:
    """(entries, cholesky factor) over the positive points, jittered if needed."""
    sub, _ = _positive_subgrid(grid)
    if sub.n_points < 2:
        raise ValueError("need at least two positive grid points")
    M = _covariance_matrix(sub.points, H)
    jitter = _JITTER_BASE * np.trace(M) / M.shape[0]
    for attempt in range(_JITTER_ROUNDS + 1):
        try:
            L = np.linalg.cholesky(M)
        except np.linalg.LinAlgError:
            if attempt == 0 and np.linalg.eigvalsh(M).min() < -TOL_PSD:
                raise SynthesisError(
                    "covariance matrix is not PSD beyond floating-point tolerance"
                ) from None
            if attempt == _JITTER_ROUNDS:
                raise SynthesisError("Cholesky failed after exhausting the jitter budget") from None
            M = M + jitter * np.eye(M.shape[0])
        else:
            M.flags.writeable = False
            L.flags.writeable = False
            return M, L
    raise AssertionError("unreachable")


def build_covariance_grid(grid: TimeGrid, h: HurstParam | float) -> CovarianceGrid:
    """Covariance matrix over the positive grid points (t=0 row is dropped)."""
    H = _hurst_value(h)
    sub, _ = _positive_subgrid(grid)
    entries, _ = _grid_factorization(grid, H)
    return CovarianceGrid(sub, entries.copy())


def generate_cholesky(
    grid: TimeGrid, d: int, h: HurstParam | float, seed: int
) -> SamplePath:
    """Exact d-dimensional fBm sample via dense Cholesky factorization.

    Components are independent streams of the same seed; the path is pinned to
    zero at t=0 when the grid starts there.  Deterministic for a fixed seed.
    """
    H = _hurst_value(h)
    if d < 1:
        raise ValueError("d must be >= 1")
    if grid.n_points > CHOLESKY_MAX_N:
        raise ValueError(f"grid exceeds {CHOLESKY_MAX_N} points; use generate_circulant")
    _, L = _grid_factorization(grid, H)
    npos = L.shape[0]
    z = np.empty((npos, d))
    for j in range(d):
        z[:, j] = component_rng(seed, j).standard_normal(npos)
    v = L @ z
    if grid.t_start == 0.0:
        v = np.vstack([np.zeros((1, d)), v])
    return SamplePath(grid, v, hurst=HurstParam(H), seed=seed)


@functools.lru_cache(maxsize=16)
def _embedding_eigenvalues(H: float, m: int) -> np.ndarray:
    """FFT eigenvalues of the circulant embedding of unit-spacing fGn, m increments."""

    def eigs(mm: int) -> np.ndarray:
        k = np.arange(mm + 1, dtype=float)
        gamma = 0.5 * ((k + 1) ** (2 * H) - 2 * k ** (2 * H) + np.abs(k - 1) ** (2 * H))
        row = np.concatenate([gamma[:-1], [gamma[mm]], gamma[mm - 1 : 0 : -1]])
        return np.fft.fft(row).real

    lam = eigs(m)
    for doubled in (False, True):
        neg = lam < 0
        if not neg.any():
            break
        if -lam[neg].sum() <= NEG_EIG_TOL * np.abs(lam).sum():
            lam = np.clip(lam, 0.0, None)
            break
        if doubled:
            raise SynthesisError("circulant embedding stayed indefinite after doubling")
        lam = eigs(2 * m)
    lam.flags.writeable = False
    return lam


def generate_circulant(
    grid: TimeGrid, d: int, h: HurstParam | float, seed: int
) -> SamplePath:
    """O(n log n) fBm sample via circulant embedding of the increment covariance.

    Distributionally equivalent to generate_cholesky; requires a grid starting
    at zero so increments form stationary fractional Gaussian noise.
    """
    H = _hurst_value(h)
    if d < 1:
        raise ValueError("d must be >= 1")
    if grid.t_start != 0.0:
        raise ValueError("circulant synthesis requires a grid starting at 0")
    m = grid.n_points - 1
    lam = _embedding_eigenvalues(H, m)
    M = lam.size
    half = M // 2
    draws = np.empty((d, M))
    for j in range(d):
        draws[j] = component_rng(seed, j).standard_normal(M)
    z = np.empty((d, M), dtype=complex)
    z[:, 0] = draws[:, 0]
    z[:, half] = draws[:, 1]
    u = draws[:, 2 : half + 1]
    v = draws[:, half + 1 :]
    z[:, 1:half] = (u + 1j * v) / math.sqrt(2.0)
    z[:, half + 1 :] = np.conj(z[:, 1:half][:, ::-1])
    spectral = np.fft.ifft(np.sqrt(lam) * z, axis=1) * math.sqrt(M)
    inc = spectral.real[:, :m] * grid.spacing**H
    values = np.concatenate([np.zeros((d, 1)), np.cumsum(inc, axis=1)], axis=1).T
    return SamplePath(grid, values, hurst=HurstParam(H), seed=seed)


def empirical_holder_exponent(
    path: SamplePath, n_lags: int = 7, statistic: str = "rms"
) -> float:
    """Regularity estimate: log-log regression of increment size against lag.

    ``statistic="rms"`` regresses the root-mean-square increment, which scales
    exactly like lag^H for stationary-increment paths.  ``statistic="max"``
    uses the maximum increment normalized by its sqrt(2 log(n/lag)) extremal
    envelope; it is noisier and kept for diagnostics.
    """
    v = path.values
    n = v.shape[0]
    lags = 2 ** np.arange(n_lags)
    lags = lags[lags < n // 8]
    ys = []
    for lag in lags:
        sizes = np.sqrt(((v[lag:] - v[:-lag]) ** 2).sum(axis=1))
        if statistic == "rms":
            stat = float(np.sqrt((sizes**2).mean()))
        elif statistic == "max":
            stat = float(sizes.max()) / math.sqrt(2.0 * math.log(n / lag))
        else:
            raise ValueError("statistic must be 'rms' or 'max'")
        ys.append(math.log(stat))
    xs = np.log(lags * path.grid.spacing)
    slope, _ = np.polyfit(xs, np.array(ys), 1)
    return float(slope)


def write_path(path: SamplePath, dest: str | Path | BinaryIO) -> None:
    """Serialize in the shared binary path format (magic FRD1, little-endian)."""
    hurst = path.hurst.value if path.hurst is not None else math.nan
    seed = path.seed if path.seed is not None else 0
    header = PATH_MAGIC + _HEADER.pack(
        PATH_VERSION,
        hurst,
        path.dim,
        path.grid.n_points,
        path.grid.t_start,
        path.grid.t_end,
        seed % 2**64,
    )
    body = np.ascontiguousarray(path.values, dtype="<f8").tobytes()
    if hasattr(dest, "write"):
        dest.write(header)
        dest.write(body)
    else:
        with open(dest, "wb") as fh:
            fh.write(header)
            fh.write(body)


def read_path(src: str | Path | BinaryIO) -> SamplePath:
    """Read a path serialized by write_path."""
    if hasattr(src, "read"):
        raw = src.read()
    else:
        raw = Path(src).read_bytes()
    if raw[:4] != PATH_MAGIC:
        raise ValueError("not a path file (bad magic)")
    version, hurst, d, n, t0, t1, seed = _HEADER.unpack_from(raw, 4)
    if version != PATH_VERSION:
        raise ValueError(f"unsupported path format version {version}")
    offset = 4 + _HEADER.size
    values = np.frombuffer(raw, dtype="<f8", count=n * d, offset=offset).reshape(n, d)
    return SamplePath(
        TimeGrid(n, t0, t1),
        values.copy(),
        hurst=None if math.isnan(hurst) else HurstParam(hurst),
        seed=None if seed == 0 else seed,
    )


def path_to_csv(path: SamplePath, dest: str | Path | TextIO) -> None:
    """CSV export: header t,x1,...,xd and 17 significant digits per value."""

    def emit(fh: TextIO) -> None:
        fh.write("t," + ",".join(f"x{j + 1}" for j in range(path.dim)) + "\n")
        for t, row in zip(path.grid.points, path.values):
            fh.write(f"{t:.17g}," + ",".join(f"{x:.17g}" for x in row) + "\n")

    if hasattr(dest, "write"):
        emit(dest)
    else:
        with open(dest, "w", encoding="utf-8") as fh:
            emit(fh)
