import itertools

import numpy as np
import pytest

from hardcore_thin.model import Configuration, RadiusLaw, Window, sample_poisson


def pairwise_overlaps(config, ids):
    """Overlapping pairs among ``ids`` by an explicit double loop."""
    ids = sorted(ids)
    bad = []
    for a, b in itertools.combinations(ids, 2):
        d = float(config.window.distance(config.centers[a], config.centers[b]))
        if d < config.radii[a] + config.radii[b]:
            bad.append((a, b))
    return bad


def brute_edges(config):
    n = len(config)
    return {(a, b) for a in range(n) for b in range(a + 1, n)
            if float(config.window.distance(config.centers[a], config.centers[b]))
            < config.radii[a] + config.radii[b]}


def make_config(window, centers, radii):
    return Configuration(window, np.asarray(centers, float), np.asarray(radii, float))


@pytest.fixture
def torus20():
    return Window.torus(20.0, 2)


@pytest.fixture
def small_configs():
    window = Window.torus(12.0, 2)
    law = RadiusLaw.uniform(0.3, 0.5)
    return [sample_poisson(0.6, law, window, s) for s in range(40)]
