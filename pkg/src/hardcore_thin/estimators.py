"""h-intensity, volume fraction and boundary-neighborhood fractions of tessellations."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .model import Configuration, Window, WeightSpec
from .thinning import Tessellation, Thinning, total_weight

CHUNK = 4096


def _require_torus(window: Window, what: str) -> None:
    if not window.is_torus:
        raise ValueError(f"{what} needs a torus window; free-ball estimates are boundary-biased")


def h_intensity(t: Thinning, config: Configuration, h: WeightSpec) -> float:
    """Total weight of the kept grains per unit volume."""
    _require_torus(config.window, "h_intensity")
    return total_weight(config, t.kept, h) / config.window.volume


def _half_width(p: float, n: int) -> float:
    return 1.96 * math.sqrt(max(p * (1 - p), 0.0) / n)


def volume_fraction(t: Thinning, config: Configuration, samples: int, seed: int) -> tuple:
    """Covered fraction of ``samples`` uniform points and its 95% half-width."""
    win = config.window
    _require_torus(win, "volume_fraction")
    if not t.hard_core:
        raise ValueError("volume_fraction needs a hard-core thinning")
    if samples < 1:
        raise ValueError("samples must be positive")
    kept = list(t.kept)
    if not kept:
        return 0.0, 0.0
    centers = config.centers[kept]
    radii = config.radii[kept]
    tree = cKDTree(centers, boxsize=win.size)
    rmax = float(radii.max())
    # kept balls are disjoint, so few centers sit within rmax of any point
    k = min(len(kept), 16)
    hits = 0
    for b, lo in enumerate(range(0, samples, CHUNK)):
        n = min(CHUNK, samples - lo)
        pts = np.random.default_rng([int(seed), b]).uniform(0.0, win.size, size=(n, win.dim))
        dist, idx = tree.query(pts, k=k, distance_upper_bound=rmax)
        dist = dist.reshape(n, -1)
        idx = idx.reshape(n, -1)
        found = np.isfinite(dist)
        r_at = np.where(found, radii[np.minimum(idx, len(kept) - 1)], -np.inf)
        covered = np.any(dist < r_at, axis=1)
        if k < len(kept) and np.any(found[:, -1]):
            # saturated neighbor lists: settle those points exactly
            for p in np.nonzero(found[:, -1] & ~covered)[0]:
                near = tree.query_ball_point(pts[p], rmax)
                d = np.linalg.norm(win.displacement(centers[near] - pts[p]), axis=1)
                covered[p] = bool(np.any(d < radii[near]))
        hits += int(covered.sum())
    est = hits / samples
    return est, _half_width(est, samples)


@dataclass(frozen=True)
class BoundaryFraction:
    """``fraction``: share of points whose cube [-m, m]^d leaves their cell.
    ``upper_bound``: mean number of cells whose boundary neighborhood may hold
    the point, an upper bound on the per-cell sum."""

    fraction: float
    half_width: float
    upper_bound: float
    samples: int

    def __float__(self):
        return self.fraction


def isoperimetric_coefficient(tess: Tessellation, m: float, window: Window,
                              samples: int = 4000, seed: int = 0) -> BoundaryFraction:
    """Fraction of the window within L-infinity distance ``m`` of a cell boundary.

    A sample point counts when some corner of its cube [-m, m]^d has a
    different nearest seed; cells are convex away from wrap-around, so this
    decides whether the cube leaves the cell.
    """
    _require_torus(window, "isoperimetric_coefficient")
    if not m > 0:
        raise ValueError("m must be positive")
    if samples < 1:
        raise ValueError("samples must be positive")
    d = window.dim
    k = len(tess)
    if k == 1:
        return BoundaryFraction(0.0, 0.0, 0.0, samples)
    if 2 * m >= window.size:
        return BoundaryFraction(1.0, 0.0, float(k), samples)
    corners = np.array(list(itertools.product((-m, m), repeat=d)))
    tree = cKDTree(tess.seeds, boxsize=window.size)
    slack = 2 * m * math.sqrt(d)
    hits = 0
    upper = 0.0
    for b, lo in enumerate(range(0, samples, CHUNK)):
        n = min(CHUNK, samples - lo)
        pts = np.random.default_rng([int(seed), b]).uniform(0.0, window.size, size=(n, d))
        dist, cell = tree.query(pts)
        verts = np.mod(pts[:, None, :] + corners[None, :, :], window.size).reshape(-1, d)
        _, vcell = tree.query(verts)
        hits += int(np.sum(np.any(vcell.reshape(n, -1) != cell[:, None], axis=1)))
        near = tree.query_ball_point(pts, dist + slack, return_length=True) - 1
        upper += float(np.sum(np.where(near > 0, near + 1, 0)))
    frac = hits / samples
    return BoundaryFraction(frac, _half_width(frac, samples), upper / samples, samples)
