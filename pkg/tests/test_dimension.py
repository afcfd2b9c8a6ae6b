import math

import numpy as np
import pytest

from fracdim import dimension as dm, fbm
from fracdim.dimension import PointCloud
from fracdim.fbm import SamplePath, TimeGrid


def cantor_integer_cloud(depth=8):
    # base-3 digits restricted to {0, 2}: exact integers, exact self-similarity
    pts = []
    for i in range(2**depth):
        val = 0
        for j in range(depth):
            if (i >> j) & 1:
                val += 2 * 3**j
        pts.append(float(val))
    return PointCloud(np.array(pts))


# ------------------------------------------------------------------ box count

def test_box_count_single_point():
    for eps in (0.1, 1.0, 7.3):
        assert dm.box_count(PointCloud(np.array([[0.3, 0.4]])), eps) == 1


def test_box_count_unit_interval():
    cloud = PointCloud(np.linspace(0.0, 1.0, 2**12))
    assert abs(dm.box_count(cloud, 2.0**-6) - 64) <= 1


def test_box_count_cantor_exact_powers():
    cloud = cantor_integer_cloud(8)
    for k in range(1, 9):
        assert dm.box_count(cloud, 3.0 ** (8 - k)) == 2**k


def test_box_count_dyadic_chain():
    rng = np.random.default_rng(0)
    for dim in (1, 2, 3):
        cloud = PointCloud(rng.normal(size=(500, dim)))
        for eps in (0.5, 0.21, 0.08):
            n1 = dm.box_count(cloud, eps)
            n2 = dm.box_count(cloud, eps / 2)
            assert n1 <= n2 <= 2**dim * n1


def test_box_count_rejects_nonpositive_eps():
    with pytest.raises(ValueError):
        dm.box_count(PointCloud(np.zeros((1, 1))), 0.0)


# -------------------------------------------------------------- box dimension

def test_box_dimension_line_segment():
    cloud = PointCloud(np.linspace(0.0, 1.0, 2**12))
    est = dm.box_dimension(cloud, (1 / 8, 1 / 1024), 8)
    assert abs(est.slope - 1.0) <= 0.05
    assert est.r_squared > 0.99
    assert list(est.scales_used) == sorted(est.scales_used, reverse=True)
    assert est.counts == sorted(est.counts)


def test_box_dimension_cantor():
    # analytic self-similar dimension as oracle
    cloud = cantor_integer_cloud(8)
    est = dm.box_dimension(cloud, (3.0**7, 3.0**0), 8)
    assert abs(est.slope - math.log(2) / math.log(3)) <= 0.05


def test_box_dimension_fbm_image_d2():
    p = fbm.generate_circulant(TimeGrid(2**16 + 1, 0.0, 1.0), 2, 0.75, seed=0)
    cloud = dm.image_cloud(p)
    rng = dm.default_eps_range(cloud)
    est = dm.box_dimension(cloud, rng, max(4, int(round(math.log2(rng[0] / rng[1]))) + 1))
    assert abs(est.slope - 4.0 / 3.0) <= 0.15


def test_box_dimension_degenerate_cloud():
    est = dm.box_dimension(PointCloud(np.zeros((50, 2))), (1.0, 1 / 64), 5)
    assert est.slope == 0.0
    assert est.degenerate
    assert est.r_squared == 1.0


def test_box_dimension_needs_four_scales():
    with pytest.raises(ValueError):
        dm.box_dimension(PointCloud(np.zeros((2, 1))), (1.0, 0.1), 3)


def test_dimension_chain_subset_slope():
    # subset slope <= superset slope + regression tolerance
    p = fbm.generate_circulant(TimeGrid(2**14 + 1, 0.0, 1.0), 2, 0.6, seed=3)
    cloud = dm.image_cloud(p)
    rng_full = dm.default_eps_range(cloud)
    n_sc = max(4, int(round(math.log2(rng_full[0] / rng_full[1]))) + 1)
    idx = np.random.default_rng(1).choice(len(cloud), size=len(cloud) // 4, replace=False)
    sub = PointCloud(cloud.points[np.sort(idx)])
    full = dm.box_dimension(cloud, rng_full, n_sc).slope
    part = dm.box_dimension(sub, rng_full, n_sc).slope
    assert part <= full + 0.05


# ----------------------------------------------------------------- graph cloud

def test_graph_cloud_shape_and_constant_path():
    path = SamplePath(TimeGrid(2**12, 0.0, 1.0), np.full((2**12, 2), 0.7))
    cloud = dm.graph_cloud(path)
    assert cloud.dim_embed == 3
    est = dm.box_dimension(cloud, (1 / 8, 1 / 512), 7)
    assert abs(est.slope - 1.0) <= 0.05


def test_graph_cloud_brownian_dimension():
    p = fbm.generate_circulant(TimeGrid(2**16 + 1, 0.0, 1.0), 1, 0.5, seed=1)
    cloud = dm.graph_cloud(p)
    rng = dm.default_eps_range(cloud)
    est = dm.box_dimension(cloud, rng, max(4, int(round(math.log2(rng[0] / rng[1]))) + 1))
    assert abs(est.slope - 1.5) <= 0.15


# ------------------------------------------------------------------ level sets

def test_level_set_monotone_path():
    n = 2**12 + 1
    path = SamplePath(TimeGrid(n, 0.0, 1.0), np.linspace(0.0, 1.0, n))
    eta = dm.tube_floor(path)
    ls = dm.extract_level_set(path, np.array([0.5]), eta)
    assert ls.times.size >= 1
    assert ls.times.min() >= 0.5 - eta - 1e-12
    assert ls.times.max() <= 0.5 + eta + 1e-12
    # an isolated crossing looks zero-dimensional at scales above the tube
    est = dm.box_dimension(PointCloud(ls.times), (0.5, 8 * eta), 6)
    assert abs(est.slope) <= 0.1


def test_level_set_eta_below_floor_rejected():
    p = fbm.generate_circulant(TimeGrid(257, 0.0, 1.0), 1, 0.5, seed=2)
    floor = dm.tube_floor(p)
    with pytest.raises(ValueError, match="tube floor"):
        dm.extract_level_set(p, np.zeros(1), floor / 10)


def test_level_set_shrinking_tube_is_nested():
    p = fbm.generate_circulant(TimeGrid(2**12 + 1, 0.0, 1.0), 1, 0.5, seed=4)
    floor = dm.tube_floor(p)
    big = dm.extract_level_set(p, np.zeros(1), 4 * floor)
    small = dm.extract_level_set(p, np.zeros(1), 2 * floor)
    assert set(small.times).issubset(set(big.times))


def test_brownian_zero_set_dimension():
    # ensemble median over hitting members around 1 - dH = 0.5
    slopes, hits, total = [], 0, 48
    for seed in range(total):
        p = fbm.generate_circulant(TimeGrid(2**16 + 1, 0.0, 1.0), 1, 0.5, seed=seed)
        sub = p.restrict(0.1, 1.0)
        eta = dm.tube_floor(sub)
        ls = dm.extract_level_set(sub, np.zeros(1), eta)
        if ls.times.size < 32:
            continue
        hits += 1
        cloud = PointCloud(ls.times)
        span = dm.cloud_span(cloud)
        floor = max(4.0 * eta**2, span / 1024)
        est = dm.box_dimension(
            cloud, (span / 8, floor), max(4, int(round(math.log2(span / 8 / floor))) + 1)
        )
        slopes.append(est.slope)
    assert hits / total >= 0.1
    assert abs(float(np.median(slopes)) - 0.5) <= 0.15


# --------------------------------------------------------------------- energy

def test_energy_line_path_closed_form():
    # exact double integral of |t-s|^(-1/2) over the unit square is 8/3
    n = 2**13 + 1
    path = SamplePath(TimeGrid(n, 0.0, 1.0), np.linspace(0.0, 1.0, n))
    e = dm.energy_integral(path, 0.5, (0.0, 1.0))
    assert abs(e.value - 8.0 / 3.0) / (8.0 / 3.0) <= 0.02


def test_energy_log_kernel_finite():
    p = fbm.generate_circulant(TimeGrid(257, 0.0, 1.0), 2, 0.6, seed=5)
    e = dm.energy_integral(p, 0.0, (0.0, 1.0))
    assert math.isfinite(e.value) and e.value > 0


def test_energy_monotone_in_gamma():
    # r^(-gamma) is pointwise increasing in gamma only below unit separations,
    # so the monotone ladder is checked on a path of sub-unit diameter
    p = fbm.generate_circulant(TimeGrid(257, 0.0, 1.0), 2, 0.6, seed=6)
    diam = np.sqrt(((p.values[:, None] - p.values[None, :]) ** 2).sum(-1)).max()
    path = SamplePath(p.grid, p.values * (0.9 / diam))
    vals = [dm.energy_integral(path, g, (0.0, 1.0)).value for g in np.arange(0.25, 1.75, 0.25)]
    assert all(b >= a - 1e-12 for a, b in zip(vals, vals[1:]))


def test_energy_coincident_points_sentinel():
    n = 65
    path = SamplePath(TimeGrid(n, 0.0, 1.0), np.zeros((n, 1)))
    assert dm.energy_integral(path, 0.5, (0.0, 1.0)).value == math.inf


# ----------------------------------------------------------------- mu measure

def test_mu_constant_path_at_level():
    n, eps = 2**10 + 1, 0.125  # grid-aligned restriction start
    path = SamplePath(TimeGrid(n, 0.0, 1.0), np.full((n, 1), 0.3))
    for sharp in (4.0, 64.0):
        mass, _ = dm.mu_measure(path, np.array([0.3]), sharp, 0.4, (eps, 1.0))
        # trapezoid of a constant integrand is exact
        expected = (2 * math.pi * sharp) ** 0.5 * (1 - eps)
        assert mass == pytest.approx(expected, rel=1e-9)


def test_mu_constant_path_off_level():
    n, eps, r = 2**10 + 1, 0.125, 0.5
    path = SamplePath(TimeGrid(n, 0.0, 1.0), np.full((n, 1), r))
    sharp = 16.0
    mass, _ = dm.mu_measure(path, np.zeros(1), sharp, 0.4, (eps, 1.0))
    expected = (2 * math.pi * sharp) ** 0.5 * math.exp(-sharp * r * r / 2) * (1 - eps)
    assert mass == pytest.approx(expected, rel=1e-9)


def test_mu_mass_splits_additively():
    p = fbm.generate_circulant(TimeGrid(2**10 + 1, 0.0, 1.0), 1, 0.5, seed=7)
    whole, _ = dm.mu_measure(p, np.zeros(1), 16.0, 0.4, (0.25, 1.0))
    left, _ = dm.mu_measure(p, np.zeros(1), 16.0, 0.4, (0.25, 0.5))
    right, _ = dm.mu_measure(p, np.zeros(1), 16.0, 0.4, (0.5, 1.0))
    assert whole == pytest.approx(left + right, rel=1e-9)


def test_mu_requires_positive_epsilon():
    p = fbm.generate_circulant(TimeGrid(65, 0.0, 1.0), 1, 0.5, seed=8)
    with pytest.raises(ValueError):
        dm.mu_measure(p, np.zeros(1), 4.0, 0.4, (0.0, 1.0))


# ------------------------------------------------------------------- plumbing

def test_point_cloud_validation():
    with pytest.raises(ValueError):
        PointCloud(np.zeros((0, 2)))
    with pytest.raises(ValueError):
        PointCloud(np.array([[np.inf]]))


def test_tube_floor_dominates_single_steps():
    p = fbm.generate_circulant(TimeGrid(2**10 + 1, 0.0, 1.0), 2, 0.4, seed=9)
    steps = np.sqrt((np.diff(p.values, axis=0) ** 2).sum(axis=1))
    assert dm.tube_floor(p) >= steps.max() - 1e-12
