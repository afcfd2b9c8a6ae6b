"""Truncated tensor algebra over discrete paths.

Segment signatures, Chen concatenation, homogeneous norms, exact p-variation
by dynamic programming, and the 2-D rho-variation of covariance grids.
Depth is capped at 3, which covers every Hurst index above 1/4.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .fbm import CovarianceGrid, HurstParam, SamplePath, TimeGrid

__all__ = [
    "DP_MAX_N",
    "PartitionValue",
    "SignaturePath",
    "TruncatedTensor",
    "chen_concat",
    "coarsen",
    "homogeneous_norm",
    "identity_tensor",
    "lift_path",
    "p_variation",
    "required_depth",
    "rho_variation_2d",
    "segment_signature",
    "signature_to_json",
]

#: largest grid for which exact partition suprema are computed
DP_MAX_N = 4096
MAX_DEPTH = 3


@dataclass(frozen=True)
class TruncatedTensor:
    """Element of the truncated tensor algebra, levels 0..depth.

    ``levels[m]`` has shape (dim,) * m; level 0 is the scalar unit slot and
    equals 1 for group elements (signatures).
    """

    dim: int
    depth: int
    levels: tuple[np.ndarray, ...]

    def __post_init__(self) -> None:
        if not 1 <= self.depth <= MAX_DEPTH:
            raise ValueError(f"depth must be 1..{MAX_DEPTH}")
        if len(self.levels) != self.depth + 1:
            raise ValueError("levels must run from 0 to depth")
        fixed = []
        for m, lv in enumerate(self.levels):
            arr = np.asarray(lv, dtype=float)
            if arr.shape != (self.dim,) * m:
                raise ValueError(f"level {m} must have shape {(self.dim,) * m}")
            if not np.all(np.isfinite(arr)):
                raise ValueError("tensor entries must be finite")
            fixed.append(arr)
        object.__setattr__(self, "levels", tuple(fixed))

    def level(self, m: int) -> np.ndarray:
        return self.levels[m]


@dataclass(frozen=True)
class PartitionValue:
    """p-variation value together with the partition that achieves it."""

    p: float
    value: float
    argmax_partition: list[int]

    def __post_init__(self) -> None:
        part = list(self.argmax_partition)
        if any(b <= a for a, b in zip(part, part[1:])):
            raise ValueError("partition indices must be strictly increasing")
        object.__setattr__(self, "argmax_partition", part)


@dataclass(frozen=True)
class SignaturePath:
    """Per-interval truncated signatures of a piecewise-linear path.

    ``levels[m-1]`` stacks the level-m tensors of all intervals with shape
    (n_intervals, dim, ..., dim).  Chen-consistency across adjacent intervals
    holds by construction.
    """

    grid: TimeGrid
    dim: int
    depth: int
    levels: tuple[np.ndarray, ...]
    hurst: HurstParam | None = None

    def __post_init__(self) -> None:
        n = self.grid.n_points - 1
        for m, lv in enumerate(self.levels, start=1):
            if lv.shape != (n,) + (self.dim,) * m:
                raise ValueError(f"level {m} array has wrong shape {lv.shape}")

    @property
    def n_intervals(self) -> int:
        return self.grid.n_points - 1

    def increment(self, k: int) -> TruncatedTensor:
        """Signature of the k-th grid interval."""
        return TruncatedTensor(
            self.dim,
            self.depth,
            (np.array(1.0),) + tuple(lv[k] for lv in self.levels),
        )

    def combined(self, i: int, j: int) -> TruncatedTensor:
        """Signature over [t_i, t_j]: left fold of the interval increments."""
        if not 0 <= i < j <= self.n_intervals:
            raise ValueError("need 0 <= i < j <= n_intervals")
        acc = self.increment(i)
        for k in range(i + 1, j):
            acc = chen_concat(acc, self.increment(k))
        return acc


def identity_tensor(dim: int, depth: int) -> TruncatedTensor:
    levels = [np.array(1.0)] + [np.zeros((dim,) * m) for m in range(1, depth + 1)]
    return TruncatedTensor(dim, depth, tuple(levels))


def segment_signature(increment: np.ndarray, depth: int) -> TruncatedTensor:
    """Signature exp(increment) of a linear segment: level m is Delta^(x)m / m!."""
    delta = np.asarray(increment, dtype=float).reshape(-1)
    d = delta.size
    levels: list[np.ndarray] = [np.array(1.0)]
    if depth >= 1:
        levels.append(delta.copy())
    if depth >= 2:
        levels.append(np.multiply.outer(delta, delta) / 2.0)
    if depth >= 3:
        levels.append(np.multiply.outer(np.multiply.outer(delta, delta), delta) / 6.0)
    return TruncatedTensor(d, depth, tuple(levels))


def chen_concat(a: TruncatedTensor, b: TruncatedTensor) -> TruncatedTensor:
    """Truncated tensor product; the composition law of signatures."""
    if a.dim != b.dim or a.depth != b.depth:
        raise ValueError("tensors must share dim and depth")
    levels = []
    for m in range(a.depth + 1):
        acc = np.zeros((a.dim,) * m)
        for i in range(m + 1):
            acc = acc + np.multiply.outer(a.levels[i], b.levels[m - i])
        levels.append(acc)
    return TruncatedTensor(a.dim, a.depth, tuple(levels))


def homogeneous_norm(a: TruncatedTensor) -> float:
    """max_m |level m|^(1/m); equivalent to the Carnot-Caratheodory norm."""
    if float(a.levels[0]) != 1.0:
        raise ValueError("homogeneous norm is defined on group elements (level 0 = 1)")
    best = 0.0
    for m in range(1, a.depth + 1):
        size = float(np.sqrt((a.levels[m] ** 2).sum()))
        best = max(best, size ** (1.0 / m))
    return best


def required_depth(h: HurstParam | float) -> int:
    """Signature depth needed for the lift: 2 above H = 1/3, else 3."""
    H = h.value if isinstance(h, HurstParam) else float(h)
    return 2 if H > 1.0 / 3.0 else 3


def lift_path(path: SamplePath, depth: int) -> SignaturePath:
    """Per-interval signatures of the sampled path, read as piecewise linear.

    For a path tagged with a Hurst index the depth must be at least the lift
    requirement (2 for H > 1/3, 3 for 1/4 < H <= 1/3).
    """
    if not 1 <= depth <= MAX_DEPTH:
        raise ValueError(f"depth must be 1..{MAX_DEPTH}")
    if path.hurst is not None and depth < required_depth(path.hurst):
        raise ValueError(
            f"depth {depth} inconsistent with declared hurst {path.hurst.value}"
            f" (needs >= {required_depth(path.hurst)})"
        )
    delta = np.diff(path.values, axis=0)
    levels = [delta]
    if depth >= 2:
        levels.append(0.5 * np.einsum("ki,kj->kij", delta, delta))
    if depth >= 3:
        levels.append(np.einsum("ki,kj,kl->kijl", delta, delta, delta) / 6.0)
    return SignaturePath(path.grid, path.dim, depth, tuple(levels), hurst=path.hurst)


def coarsen(sig: SignaturePath, factor: int) -> SignaturePath:
    """Chen-combine consecutive intervals in blocks of ``factor``."""
    n = sig.n_intervals
    if factor < 1 or n % factor:
        raise ValueError("factor must divide the interval count")
    if factor == 1:
        return sig
    nb = n // factor
    d = sig.dim
    b1 = sig.levels[0].reshape(nb, factor, d)
    g1 = np.zeros((nb, d))
    g2 = np.zeros((nb, d, d)) if sig.depth >= 2 else None
    g3 = np.zeros((nb, d, d, d)) if sig.depth >= 3 else None
    if sig.depth >= 2:
        b2 = sig.levels[1].reshape(nb, factor, d, d)
    if sig.depth >= 3:
        b3 = sig.levels[2].reshape(nb, factor, d, d, d)
    for r in range(factor):
        a1 = b1[:, r]
        if sig.depth >= 3:
            g3 += (
                b3[:, r]
                + np.einsum("bi,bjk->bijk", g1, b2[:, r])
                + np.einsum("bij,bk->bijk", g2, a1)
            )
        if sig.depth >= 2:
            g2 += b2[:, r] + np.einsum("bi,bj->bij", g1, a1)
        g1 += a1
    grid = TimeGrid(nb + 1, sig.grid.t_start, sig.grid.t_end)
    levels = [g1] + ([g2] if g2 is not None else []) + ([g3] if g3 is not None else [])
    return SignaturePath(grid, d, sig.depth, tuple(levels), hurst=sig.hurst)


def _cumulative(sig: SignaturePath) -> list[np.ndarray]:
    """Running signatures g_k over [t_0, t_k] for k = 0..n_intervals."""
    n, d = sig.n_intervals, sig.dim
    b1 = sig.levels[0]
    g1 = np.zeros((n + 1, d))
    np.cumsum(b1, axis=0, out=g1[1:])
    out = [g1]
    if sig.depth >= 2:
        b2 = sig.levels[1]
        inc2 = b2 + np.einsum("ki,kj->kij", g1[:-1], b1)
        g2 = np.zeros((n + 1, d, d))
        np.cumsum(inc2, axis=0, out=g2[1:])
        out.append(g2)
    if sig.depth >= 3:
        b3 = sig.levels[2]
        inc3 = (
            b3
            + np.einsum("ki,kjl->kijl", g1[:-1], b2)
            + np.einsum("kij,kl->kijl", g2[:-1], b1)
        )
        g3 = np.zeros((n + 1, d, d, d))
        np.cumsum(inc3, axis=0, out=g3[1:])
        out.append(g3)
    return out


def _dyadic_nodes(n_nodes: int, max_nodes: int) -> np.ndarray:
    levels = 0
    while 2 ** (levels + 1) + 1 <= max_nodes:
        levels += 1
    k = np.arange(2**levels + 1, dtype=float)
    return np.unique(np.round(k * (n_nodes - 1) / 2**levels).astype(int))


def p_variation(sig: SignaturePath, p: float, dyadic: bool = False) -> PartitionValue:
    """Supremum over grid sub-partitions of (sum |increment|^p)^(1/p).

    Exact dynamic programming over all grid indices up to DP_MAX_N points;
    larger grids must opt into the dyadic sub-partition approximation.
    """
    if p < 1:
        raise ValueError("p must be >= 1")
    n_nodes = sig.n_intervals + 1
    if n_nodes > DP_MAX_N:
        if not dyadic:
            raise ValueError(f"grid exceeds {DP_MAX_N} points; pass dyadic=True")
        nodes = _dyadic_nodes(n_nodes, DP_MAX_N)
    else:
        nodes = np.arange(n_nodes)
    cum = _cumulative(sig)
    g1 = cum[0][nodes]
    g2 = cum[1][nodes] if sig.depth >= 2 else None
    g3 = cum[2][nodes] if sig.depth >= 3 else None
    m = nodes.size
    best = np.empty(m)
    best[0] = 0.0
    ptr = np.zeros(m, dtype=int)
    for j in range(1, m):
        l1 = g1[j] - g1[:j]
        norm = np.sqrt((l1**2).sum(axis=-1))
        if g2 is not None:
            l2 = g2[j] - g2[:j] - np.einsum("ki,kj->kij", g1[:j], l1)
            np.maximum(norm, (l2**2).sum(axis=(-2, -1)) ** 0.25, out=norm)
        if g3 is not None:
            l3 = (
                g3[j]
                - g3[:j]
                - np.einsum("kij,kl->kijl", g2[:j], l1)
                - np.einsum("ki,kjl->kijl", g1[:j], g2[j] - g2[:j])
                + np.einsum("ki,kj,kl->kijl", g1[:j], g1[:j], l1)
            )
            np.maximum(norm, (l3**2).sum(axis=(-3, -2, -1)) ** (1.0 / 6.0), out=norm)
        cand = best[:j] + norm**p
        k = int(np.argmax(cand))
        best[j] = cand[k]
        ptr[j] = k
    part = [m - 1]
    while part[-1] != 0:
        part.append(int(ptr[part[-1]]))
    part.reverse()
    return PartitionValue(p, float(best[-1] ** (1.0 / p)), [int(nodes[i]) for i in part])


def rho_variation_2d(cov: CovarianceGrid, rho: float) -> float:
    """2-D rho-variation of the covariance over simultaneous dyadic partitions.

    Rectangular increments are increment covariances E[(B_t-B_s)(B_v-B_u)];
    the supremum is approximated over same-level dyadic sub-partitions of the
    stored grid.
    """
    if rho < 1:
        raise ValueError("rho must be >= 1")
    n = cov.grid.n_points
    if n > DP_MAX_N:
        raise ValueError(f"grid exceeds {DP_MAX_N} points")
    max_level = max(int(math.floor(math.log2(n - 1))), 0) if n > 1 else 0
    best = 0.0
    for level in range(max_level + 1):
        k = np.arange(2**level + 1, dtype=float)
        idx = np.unique(np.round(k * (n - 1) / 2**level).astype(int))
        s = cov.entries[np.ix_(idx, idx)]
        rect = s[1:, 1:] - s[1:, :-1] - s[:-1, 1:] + s[:-1, :-1]
        best = max(best, float((np.abs(rect) ** rho).sum() ** (1.0 / rho)))
    return best


def signature_to_json(sig: SignaturePath) -> dict:
    """JSON-ready dump used by docs and tests."""
    return {
        "dim": sig.dim,
        "depth": sig.depth,
        "grid": {
            "n_points": sig.grid.n_points,
            "t_start": sig.grid.t_start,
            "t_end": sig.grid.t_end,
        },
        "levels": [lv.tolist() for lv in sig.levels],
    }
