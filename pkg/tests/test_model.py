import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hardcore_thin.model import (Configuration, Grain, RadiusLaw, Window, WeightSpec,
                                 interiors_overlap, sample_poisson, unit_ball_volume, weight)


def test_unit_ball_volumes():
    assert unit_ball_volume(1) == pytest.approx(2.0)
    assert unit_ball_volume(2) == pytest.approx(math.pi)
    assert unit_ball_volume(3) == pytest.approx(4 * math.pi / 3)


def test_window_validation():
    with pytest.raises(ValueError):
        Window.free_ball(2.0)
    with pytest.raises(ValueError):
        Window.torus(10.0, 4)
    with pytest.raises(ValueError):
        Window.torus(-1.0)


def test_torus_minimum_image():
    w = Window.torus(10.0, 2)
    assert float(w.distance([0.5, 0.5], [9.5, 9.5])) == pytest.approx(math.sqrt(2))
    assert float(w.distance([1, 1], [6, 1])) == pytest.approx(5.0)


def test_free_ball_samples_stay_inside():
    w = Window.free_ball(5.0, 3)
    pts = w.sample_uniform(np.random.default_rng(1), 2000)
    assert np.all(np.linalg.norm(pts, axis=1) <= 5.0)


def test_free_ball_radial_law():
    # fraction inside half the radius is 2^-d for a uniform point in a ball
    w = Window.free_ball(4.0, 2)
    pts = w.sample_uniform(np.random.default_rng(2), 40000)
    frac = np.mean(np.linalg.norm(pts, axis=1) <= 2.0)
    assert abs(frac - 0.25) < 4 * math.sqrt(0.25 * 0.75 / 40000)


def test_tangent_balls_do_not_overlap():
    w = Window.torus(10.0, 2)
    assert not interiors_overlap(Grain(0, (1.0, 1.0), 1.0), Grain(1, (3.0, 1.0), 1.0), w)
    assert interiors_overlap(Grain(0, (1.0, 1.0), 1.0), Grain(1, (2.999, 1.0), 1.0), w)


def test_overlap_across_torus_seam():
    w = Window.torus(10.0, 2)
    assert interiors_overlap(Grain(0, (0.2, 5.0), 0.5), Grain(1, (9.7, 5.0), 0.5), w)


def test_grain_rejects_nonpositive_radius():
    with pytest.raises(ValueError):
        Grain(0, (0.0, 0.0), 0.0)


def test_configuration_validation():
    w = Window.torus(5.0, 2)
    with pytest.raises(ValueError):
        Configuration(w, [[1.0, 1.0]], [0.5, 0.5])
    with pytest.raises(ValueError):
        Configuration(w, [[6.0, 1.0]], [0.5])
    c = Configuration(w, [[1.0, 1.0]], [0.5])
    with pytest.raises(ValueError):
        c.centers[0, 0] = 2.0


def test_subset_tracks_source_ids():
    w = Window.torus(5.0, 2)
    c = Configuration(w, [[1, 1], [2, 2], [3, 3], [4, 4]], [0.1] * 4)
    s = c.subset([3, 1])
    assert s.source_ids == (1, 3)
    assert s.subset([1]).source_ids == (3,)


def test_from_grains_round_trip():
    w = Window.torus(5.0, 2)
    c = Configuration(w, [[1, 1], [2, 2]], [0.1, 0.2])
    assert Configuration.from_grains(w, c.grains).same_as(c)


def test_sampling_is_deterministic():
    w = Window.torus(10.0, 2)
    law = RadiusLaw.uniform(0.3, 0.5)
    assert sample_poisson(1.0, law, w, 7).same_as(sample_poisson(1.0, law, w, 7))
    assert not sample_poisson(1.0, law, w, 7).same_as(sample_poisson(1.0, law, w, 8))


def test_sampling_rejects_large_radii_on_small_torus():
    with pytest.raises(ValueError):
        sample_poisson(1.0, RadiusLaw.fixed(1.0), Window.torus(4.0, 2), 0)


def test_poisson_mean_count():
    # Poisson count with mean intensity * L^d; 400 replicates of mean 100
    w = Window.torus(10.0, 2)
    counts = [len(sample_poisson(1.0, RadiusLaw.fixed(0.2), w, s)) for s in range(400)]
    se = math.sqrt(100 / 400)
    assert abs(np.mean(counts) - 100) < 4 * se
    assert abs(np.var(counts, ddof=1) - 100) < 25


def test_radius_law_support():
    rng = np.random.default_rng(0)
    r = RadiusLaw.uniform(0.0, 1.0).sample(rng, 10000)
    assert r.min() > 0 and r.max() <= 1
    assert abs(r.mean() - 0.5) < 0.02
    assert np.all(RadiusLaw.fixed(0.4).sample(rng, 3) == 0.4)
    with pytest.raises(ValueError):
        RadiusLaw.uniform(1.0, 1.0)


def test_weight_values():
    assert weight(Grain(0, (0, 0), 1.0), WeightSpec.volume(), 2) == pytest.approx(math.pi)
    assert weight(Grain(0, (0, 0), 2.0), WeightSpec.unit(), 3) == 1.0
    assert weight(Grain(0, (0, 0), 0.5), WeightSpec.exp_radius(2.0), 2) == pytest.approx(math.e)
    with pytest.raises(ValueError):
        WeightSpec.exp_radius(0.5)


def test_exp_weights_survive_huge_exponents():
    h = WeightSpec.exp_radius(4096.0)
    r = np.array([0.9, 1.0])
    rel = h.relative_values(r, 2)
    assert rel[1] == 1.0 and 0 < rel[0] < 1e-100
    assert np.all(np.isfinite(h.log_values(r, 2)))


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0.01, 3.0), min_size=2, max_size=6),
       st.sampled_from(["unit", "volume", "exp"]))
def test_order_key_matches_weight_order(radii, kind):
    h = WeightSpec(kind, 1.5 if kind == "exp" else 0.0)
    w = h.values(radii, 2)
    k = h.order_key(radii)
    for i in range(len(radii)):
        for j in range(len(radii)):
            if k[i] < k[j]:
                assert w[i] <= w[j]
            if w[i] < w[j]:
                assert k[i] < k[j]
