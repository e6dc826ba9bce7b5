import math
from collections import deque

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import brute_edges, make_config
from hardcore_thin.graph import build_contact_graph
from hardcore_thin.hugegrains import (GoodSiteGrid, WindowTooSmall, cluster_extents,
                                      disagreement_components, good_site_grid, huge_exponent,
                                      huge_fraction, huge_mask, is_a_huge, shield_check)
from hardcore_thin.graph import build_directed_graph
from hardcore_thin.model import Configuration, RadiusLaw, Window, WeightSpec, sample_poisson
from hardcore_thin.thinning import Thinning, component_max, local_improve, matern_one

T = Window.torus(10.0, 2)


def _direct_huge(config, k, a, edges=None):
    """exp(a r_k) against the plain sum, no rescaling; fine for moderate a."""
    edges = brute_edges(config) if edges is None else edges
    r = config.radii
    total = sum(math.exp(a * r[j]) for j in range(len(config))
                if j != k and (min(j, k), max(j, k)) in edges and r[j] < r[k])
    return math.exp(a * r[k]) > total


def test_isolated_grain_is_huge():
    assert is_a_huge(0, make_config(T, [[5, 5]], [0.5]), 1)


def test_single_smaller_neighbour():
    c = make_config(T, [[5, 5], [5.8, 5]], [0.9, 0.5])
    assert is_a_huge(0, c, 10)
    assert is_a_huge(1, c, 10)  # the larger neighbour does not count


def test_three_slightly_smaller_neighbours():
    c = make_config(T, [[5, 5], [5.8, 5], [4.2, 5], [5, 5.8]], [0.5, 0.49, 0.49, 0.49])
    # e^0.5 ~ 1.6487 against 3 e^0.49 ~ 4.897
    assert not is_a_huge(0, c, 1)
    # 49 + ln 3 > 50, so a = 100 is not enough; at a = 200, e^100 beats 3 e^98
    assert not is_a_huge(0, c, 100)
    assert is_a_huge(0, c, 200)
    assert math.exp(100) > 3 * math.exp(98) and not math.exp(50) > 3 * math.exp(49)


def test_huge_rejects_small_a():
    with pytest.raises(ValueError):
        is_a_huge(0, make_config(T, [[5, 5]], [0.5]), 0.5)


def test_huge_exponent():
    assert huge_exponent(2, 2) == 16 and huge_exponent(3, 1) == 9 and huge_exponent(2, 3) == 64


@pytest.mark.parametrize("a", [1, 3, 16, 81])
def test_huge_mask_matches_direct_sum(a):
    for s in range(10):
        c = sample_poisson(1.0, RadiusLaw.uniform(0.0, 1.0), T, s)
        g = build_contact_graph(c)
        mask = huge_mask(c, a, g)
        edges = brute_edges(c)
        for k in range(len(c)):
            assert mask[k] == is_a_huge(k, c, a, g) == _direct_huge(c, k, a, edges)


@settings(max_examples=200, deadline=None)
@given(r0=st.floats(0.1, 1.0), r1=st.floats(0.1, 1.0), a1=st.floats(1, 50), a2=st.floats(1, 50))
def test_single_neighbour_monotone_in_a(r0, r1, a1, a2):
    c = make_config(T, [[5, 5], [5.1, 5]], [r0, r1])
    lo, hi = sorted((a1, a2))
    if is_a_huge(0, c, lo):
        assert is_a_huge(0, c, hi)


def test_huge_fraction_counts_cube():
    c = make_config(Window.torus(12.0, 2), [[0, 0], [0.5, 0], [5, 5]], [0.3, 0.4, 0.2])
    # only grains 0 and 1 lie in the side-6 cube; exp(16 * (0.3 - 0.4)) < 1, so both are huge
    assert huge_fraction(c, 2) == (2, 2)
    c = make_config(Window.torus(12.0, 2), [[0, 0], [0.5, 0], [0, 0.5]], [0.4, 0.3, 0.3])
    # 2 exp(-0.1) > 1: the big grain loses to its two smaller neighbours at a = 1
    assert huge_fraction(c, 1) == (2, 3)


# -------------------------------------------------------------- good sites

def test_empty_configuration_all_sites_good():
    empty = Configuration(Window.torus(24.0, 2), np.zeros((0, 2)), np.zeros(0))
    grid = good_site_grid(empty, 4)
    assert grid.good.all() and len(grid.sites) == 36 and grid.period == 6
    ball = Configuration(Window.free_ball(10.0, 2), np.zeros((0, 2)), np.zeros(0))
    grid = good_site_grid(ball, 2)
    assert grid.good.all() and grid.period is None
    assert all(np.linalg.norm(2 * z) + 3 * math.sqrt(2) <= 10 for z in grid.sites)


def test_window_too_small():
    empty = Configuration(Window.torus(10.0, 2), np.zeros((0, 2)), np.zeros(0))
    with pytest.raises(WindowTooSmall):
        good_site_grid(empty, 4)  # 10 is not a multiple of 4
    empty = Configuration(Window.torus(8.0, 2), np.zeros((0, 2)), np.zeros(0))
    with pytest.raises(WindowTooSmall):
        good_site_grid(empty, 4)
    ball = Configuration(Window.free_ball(4.0, 2), np.zeros((0, 2)), np.zeros(0))
    with pytest.raises(WindowTooSmall):
        good_site_grid(ball, 2)


def test_escaping_cluster_makes_site_bad():
    # a chain of growing grains leaves Q_6 around the site at (12, 12)
    w = Window.torus(24.0, 2)
    c = make_config(w, [[12, 12], [12.6, 12], [13.5, 12], [14.6, 12], [15.9, 12]],
                    [0.3, 0.4, 0.55, 0.65, 0.75])
    grid = good_site_grid(c, 2)
    i = grid.index[(6, 6)]
    assert not grid.cluster_ok[i] and not grid.good[i]
    far = grid.index[(0, 0)]
    assert grid.good[far]


def _cluster_box_oracle(config, k, edges):
    """Lifted positions of the cluster of k via breadth-first search on brute edges."""
    r = config.radii
    pos = {k: np.zeros(config.dim)}
    queue = deque([k])
    while queue:
        x = queue.popleft()
        for y in range(len(config)):
            if y in pos or (min(x, y), max(x, y)) not in edges or not r[y] > r[x]:
                continue
            pos[y] = pos[x] + config.window.displacement(config.centers[y] - config.centers[x])
            queue.append(y)
    lo = np.min([p - r[j] for j, p in pos.items()], axis=0)
    hi = np.max([p + r[j] for j, p in pos.items()], axis=0)
    return lo, hi


def test_good_sites_match_direct_oracle():
    w = Window.torus(24.0, 2)
    a = 2
    for s in range(4):
        c = sample_poisson(1.0, RadiusLaw.uniform(0.0, 1.0), w, s)
        grid = good_site_grid(c, a)
        edges = brute_edges(c)
        huge = [_direct_huge(c, k, huge_exponent(a, 2), edges) for k in range(len(c))]
        boxes = [_cluster_box_oracle(c, k, edges) for k in range(len(c))]
        for i, z in enumerate(grid.sites):
            delta = w.displacement(c.centers - a * z)
            in3 = np.all(np.abs(delta) <= 1.5 * a, axis=1)
            in1 = np.all(np.abs(delta) <= 0.5 * a, axis=1)
            ok = all(huge[k] for k in np.nonzero(in3)[0])
            for k in np.nonzero(in1)[0]:
                lo, hi = boxes[k]
                ok &= bool(np.all(delta[k] + lo >= -1.5 * a) and np.all(delta[k] + hi <= 1.5 * a))
            assert grid.good[i] == ok


def test_cluster_extents_cover_members():
    c = sample_poisson(1.0, RadiusLaw.uniform(0.0, 1.0), Window.torus(12.0, 2), 7)
    lo, hi = cluster_extents(c, build_directed_graph(c))
    edges = brute_edges(c)
    for k in range(len(c)):
        elo, ehi = _cluster_box_oracle(c, k, edges)
        assert np.allclose(lo[k], elo) and np.allclose(hi[k], ehi)


def test_good_fraction_rises_with_a():
    w = Window.torus(24.0, 2)
    fr = {a: np.mean([good_site_grid(sample_poisson(1.0, RadiusLaw.uniform(0.0, 1.0), w, s),
                                     a).good_fraction for s in range(10)]) for a in (2, 4, 8)}
    assert fr[2] < fr[4] <= fr[8]


# ---------------------------------------------------------- disagreements

def test_disagreement_components():
    c = make_config(T, [[1, 1], [5, 5], [5.5, 5], [8, 8]], [0.3, 0.4, 0.4, 0.3])
    t = Thinning((0, 1, 3), "x", True)
    assert disagreement_components(c, t, t) == []
    u = Thinning((0, 1), "y", True)
    assert disagreement_components(c, t, u) == [[3]]
    v = Thinning((0, 2, 3), "z", True)
    assert [sorted(x) for x in disagreement_components(c, t, v)] == [[1, 2]]


def test_exact_thinnings_agree():
    for s in range(10):
        c = sample_poisson(0.6, RadiusLaw.uniform(0.3, 0.5), Window.torus(12.0, 2), s)
        h = WeightSpec.volume()
        t1 = component_max(c, h)
        t2 = local_improve(c, matern_one(c), h, math.inf, 15)
        assert disagreement_components(c, t1, t2) == []


# ------------------------------------------------------------------ shield

def _grid(good, period, a=1):
    sites = np.array([[i, j] for i in range(period) for j in range(period)])
    g = np.array([good(i, j) for i, j in sites.tolist()])
    return GoodSiteGrid(a, sites, g, g.copy(), g.copy(), period)


def test_shield_all_good_identical_thinnings():
    c = sample_poisson(0.5, RadiusLaw.uniform(0.0, 1.0), Window.torus(24.0, 2), 1)
    grid = _grid(lambda i, j: True, 8, a=3)
    t = component_max(c, WeightSpec.exp_radius(81))
    rep = shield_check(c, grid, t, t)
    assert rep.ok and rep.in_good_cube == len(c) and rep.components == []


def test_shield_no_good_sites_is_vacuous():
    c = sample_poisson(0.5, RadiusLaw.uniform(0.0, 1.0), Window.torus(24.0, 2), 1)
    grid = _grid(lambda i, j: False, 8, a=3)
    rep = shield_check(c, grid, Thinning((), "e", True), component_max(c, WeightSpec.volume()))
    assert rep.enclosed == [] and rep.message == "no enclosed grains" and rep.ok


def test_ring_of_good_sites_encloses_interior():
    # bad 2x2 block at sites (3..4, 3..4) ringed by good sites; a bad stripe elsewhere wraps
    def good(i, j):
        return not ((3 <= i <= 4 and 3 <= j <= 4) or j == 7)
    grid = _grid(good, 8, a=3)
    w = Window.torus(24.0, 2)
    c = make_config(w, [[10.0, 10.0], [12.0, 21.0], [0.5, 0.5]], [0.3, 0.3, 0.3])
    t1 = Thinning((0, 1, 2), "a", True)
    t2 = Thinning((2,), "b", True)
    rep = shield_check(c, grid, t1, t2)
    # grain 0 sits in the ringed block, grain 1 on the wrapping stripe, grain 2 on a good site
    assert rep.enclosed == [0, 2] and rep.ring_enclosed == 1 and rep.in_good_cube == 1
    assert rep.violations == [0] and rep.components == [[0]] and not rep.ok


def test_shield_grid_mismatch():
    c = make_config(Window.torus(24.0, 2), [[1, 1]], [0.3])
    grid = _grid(lambda i, j: True, 8, a=3)
    with pytest.raises(ValueError):
        shield_check(c, grid, Thinning((), "e", True), Thinning((), "e", True), a=2)


def test_shielded_grains_agree_between_local_maxima():
    w = Window.torus(24.0, 2)
    a = 4
    h = WeightSpec.exp_radius(huge_exponent(a, 2))
    enclosed = 0
    for s in range(3):
        c = sample_poisson(0.5, RadiusLaw.uniform(0.0, 1.0), w, s)
        grid = good_site_grid(c, a)
        assert grid.good_fraction >= 0.9
        t1 = local_improve(c, Thinning((), "empty", True), h, 3 * a, 3)
        t2 = local_improve(c, matern_one(c), h, 3 * a, 3)
        rep = shield_check(c, grid, t1, t2)
        assert rep.ok
        enclosed += len(rep.enclosed)
    assert enclosed > 300


def test_good_site_cores_decided_locally():
    # exact maximum on the whole torus and on the grains centred in Q_3a(az) agree
    # on every grain centred in the core Q_a(az) of a good site
    w = Window.torus(24.0, 2)
    a = 2
    h = WeightSpec.exp_radius(huge_exponent(a, 2))
    checked = 0
    for s in range(6):
        c = sample_poisson(0.5, RadiusLaw.uniform(0.0, 1.0), w, s)
        grid = good_site_grid(c, a)
        full = set(component_max(c, h).kept)
        for i in np.nonzero(grid.good)[0]:
            anchor = a * grid.sites[i]
            delta = w.displacement(c.centers - anchor)
            near = np.nonzero(np.all(np.abs(delta) <= 1.5 * a, axis=1))[0]
            core = np.nonzero(np.all(np.abs(delta) <= 0.5 * a, axis=1))[0]
            if not core.size:
                continue
            local = c.subset(near.tolist())
            kept = {local.source_ids[k] for k in component_max(local, h).kept}
            for k in core.tolist():
                assert (k in full) == (k in kept)
                checked += 1
    assert checked > 300
