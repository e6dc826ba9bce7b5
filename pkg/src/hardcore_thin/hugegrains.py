"""Huge grains, good lattice sites and the shield against disagreement.

A grain is a-huge when exp(a r) beats the summed exp(a r') of all smaller
grains overlapping it. All sums are done relative to the grain's own weight,
so large ``a`` never overflows.
"""

from __future__ import annotations

import itertools
import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .graph import ContactGraph, DirectedGraph, build_contact_graph, build_directed_graph, \
    connected_components
from .model import Configuration
from .thinning import Thinning


class WindowTooSmall(ValueError):
    pass


def huge_exponent(a: int, d: int) -> int:
    """The weight exponent a^(2d) used for good sites."""
    return int(a) ** (2 * int(d))


def is_a_huge(k: int, config: Configuration, a: float, graph: ContactGraph | None = None) -> bool:
    """exp(a r_k) > sum of exp(a r_j) over overlapping grains with r_j < r_k."""
    if not a >= 1:
        raise ValueError("a must be >= 1")
    graph = graph or build_contact_graph(config)
    r = config.radii
    terms = [math.exp(a * (r[j] - r[k])) for j in graph.adjacency[k] if r[j] < r[k]]
    return math.fsum(terms) < 1.0


def huge_mask(config: Configuration, a: float, graph: ContactGraph | None = None) -> np.ndarray:
    """``is_a_huge`` for every grain at once."""
    graph = graph or build_contact_graph(config)
    r = config.radii
    i, j = graph.edges_i, graph.edges_j
    small = np.where(r[i] < r[j], i, j)
    big = np.where(r[i] < r[j], j, i)
    strict = r[i] != r[j]
    rel = np.exp(a * (r[small[strict]] - r[big[strict]]))
    totals = np.bincount(big[strict], weights=rel, minlength=len(config))
    return totals < 1.0


def cube_members(config: Configuration, center, side: float) -> np.ndarray:
    """Grains whose centers lie in the closed cube of the given side about ``center``."""
    delta = config.window.displacement(config.centers - np.asarray(center, dtype=float))
    return np.all(np.abs(delta) <= side / 2, axis=1)


def huge_fraction(config: Configuration, a: int, center=None, graph=None) -> tuple:
    """(number of a^(2d)-huge grains, number of grains) centered in Q_{3a}(center)."""
    d = config.dim
    center = np.zeros(d) if center is None else center
    inside = cube_members(config, center, 3 * a)
    huge = huge_mask(config, huge_exponent(a, d), graph)
    return int(np.sum(huge & inside)), int(np.sum(inside))


def cluster_extents(config: Configuration, directed: DirectedGraph):
    """Per grain, the bounding box of its cluster relative to the grain center.

    Clusters are computed in decreasing radius order, since every directed edge
    points to a strictly larger grain.
    """
    n = len(config)
    d = config.dim
    r = config.radii
    lo = -np.repeat(r[:, None], d, axis=1)
    hi = np.repeat(r[:, None], d, axis=1)
    win = config.window
    for k in np.argsort(-r, kind="stable").tolist():
        outs = directed.out_edges[k]
        if not outs:
            continue
        shift = win.displacement(config.centers[list(outs)] - config.centers[k])
        lo[k] = np.minimum(lo[k], (lo[list(outs)] + shift).min(axis=0))
        hi[k] = np.maximum(hi[k], (hi[list(outs)] + shift).max(axis=0))
    return lo, hi


@dataclass(frozen=True, eq=False)
class GoodSiteGrid:
    """Lattice sites ``z`` (rows of ``sites``) with Q_{3a}(az) inside the window.

    On a torus of side L the lattice is periodic with ``period`` = L / a sites
    per axis; on a free ball ``period`` is None.
    """

    a: int
    sites: np.ndarray
    good: np.ndarray
    huge_ok: np.ndarray
    cluster_ok: np.ndarray
    period: int | None = None
    index: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if not self.index:
            self.index.update({tuple(z): i for i, z in enumerate(self.sites.tolist())})

    @property
    def good_fraction(self) -> float:
        return float(self.good.mean()) if self.good.size else float("nan")

    def reduce(self, z) -> tuple:
        z = tuple(int(v) for v in z)
        return tuple(v % self.period for v in z) if self.period else z

    def is_good(self, z) -> bool:
        i = self.index.get(self.reduce(z))
        return bool(self.good[i]) if i is not None else False


def _lattice_sites(config: Configuration, a: int) -> tuple:
    win = config.window
    d = win.dim
    if win.is_torus:
        ratio = win.size / a
        period = int(round(ratio))
        if abs(ratio - period) > 1e-9 or 3 * a > win.size:
            raise WindowTooSmall(
                f"torus side {win.size} must be a multiple of a = {a} and at least 3a")
        sites = np.array(list(itertools.product(range(period), repeat=d)), dtype=int)
        return sites, period
    reach = int(math.floor(win.size / a))
    cand = np.array(list(itertools.product(range(-reach, reach + 1), repeat=d)), dtype=int)
    ok = np.linalg.norm(a * cand, axis=1) + 1.5 * a * math.sqrt(d) <= win.size
    if not ok.any():
        raise WindowTooSmall(f"no cube of side {3 * a} fits the free ball of radius {win.size}")
    return cand[ok], None


def good_site_grid(config: Configuration, a: int, graph: ContactGraph | None = None,
                   directed: DirectedGraph | None = None) -> GoodSiteGrid:
    """Site z is good when every grain centered in Q_{3a}(az) is a^(2d)-huge and
    every grain centered in Q_a(az) has its whole cluster (every ball) inside
    Q_{3a}(az)."""
    if int(a) != a or a < 1:
        raise ValueError("a must be a positive integer")
    a = int(a)
    sites, period = _lattice_sites(config, a)
    graph = graph or build_contact_graph(config)
    directed = directed or build_directed_graph(config, graph)
    win = config.window
    huge = huge_mask(config, huge_exponent(a, config.dim), graph)
    lo, hi = cluster_extents(config, directed)
    bad_huge = config.centers[~huge]
    huge_ok = np.ones(len(sites), dtype=bool)
    cluster_ok = np.ones(len(sites), dtype=bool)
    half3 = 1.5 * a
    for s, z in enumerate(sites):
        anchor = a * z.astype(float)
        if bad_huge.shape[0]:
            delta = win.displacement(bad_huge - anchor)
            huge_ok[s] = not np.any(np.all(np.abs(delta) <= half3, axis=1))
        if len(config):
            delta = win.displacement(config.centers - anchor)
            core = np.all(np.abs(delta) <= a / 2, axis=1)
            if core.any():
                inside = np.all((delta[core] + lo[core] >= -half3)
                                & (delta[core] + hi[core] <= half3), axis=1)
                cluster_ok[s] = bool(inside.all())
    return GoodSiteGrid(a, sites, huge_ok & cluster_ok, huge_ok, cluster_ok, period)


def disagreement_components(config: Configuration, t1: Thinning, t2: Thinning,
                            graph: ContactGraph | None = None) -> list:
    """Connected components of the contact graph on kept(t1) symmetric-difference kept(t2)."""
    graph = graph or build_contact_graph(config)
    diff = set(t1.kept) ^ set(t2.kept)
    return connected_components(graph, diff) if diff else []


@dataclass
class ShieldReport:
    enclosed: list
    in_good_cube: int
    ring_enclosed: int
    violations: list
    components: list
    message: str = ""

    @property
    def ok(self) -> bool:
        return not self.violations


def _face_steps(d: int) -> list:
    steps = []
    for k in range(d):
        for s in (-1, 1):
            e = [0] * d
            e[k] = s
            steps.append(tuple(e))
    return steps


def _bounded_components(grid: GoodSiteGrid, starts: set) -> dict:
    """For each non-good start site, whether its non-good face-connected region
    is bounded. On a torus a region is unbounded when it winds around; in a free
    ball when it reaches a site whose cube does not fit the window."""
    steps = _face_steps(grid.sites.shape[1])
    verdict = {}
    for start in sorted(starts):
        if start in verdict:
            continue
        lifted = {start: start}
        queue = deque([start])
        bounded = True
        while queue:
            cur = queue.popleft()
            for st in steps:
                nxt = tuple(c + s for c, s in zip(cur, st))
                red = grid.reduce(nxt)
                idx = grid.index.get(red)
                if idx is None:
                    bounded = False
                    continue
                if grid.good[idx]:
                    continue
                seen = lifted.get(red)
                if seen is None:
                    lifted[red] = nxt
                    queue.append(nxt)
                elif seen != nxt:
                    bounded = False
        for red in lifted:
            verdict[red] = bounded
    return verdict


def shield_check(config: Configuration, grid: GoodSiteGrid, t1: Thinning, t2: Thinning,
                 a: int | None = None, graph: ContactGraph | None = None) -> ShieldReport:
    """Check that shielded grains agree between two thinnings.

    A grain is shielded when its center lies in Q_a(az) of a good site z, or
    when its site lies in a bounded region of non-good sites (good cubes
    separate it from infinity). Shielded grains in the symmetric difference are
    reported as violations together with their disagreement component.
    """
    a = grid.a if a is None else int(a)
    if a != grid.a:
        raise ValueError("a does not match the grid")
    graph = graph or build_contact_graph(config)
    if not len(config):
        return ShieldReport([], 0, 0, [], [], "no enclosed grains")
    z_of = np.rint(config.centers / a).astype(int)
    reduced = [grid.reduce(z) for z in z_of.tolist()]
    non_good_starts = {z for z in reduced if z in grid.index and not grid.good[grid.index[z]]}
    verdict = _bounded_components(grid, non_good_starts)
    enclosed, in_cube, in_ring = [], 0, 0
    for k, z in enumerate(reduced):
        idx = grid.index.get(z)
        if idx is None:
            continue
        if grid.good[idx]:
            enclosed.append(k)
            in_cube += 1
        elif verdict.get(z, False):
            enclosed.append(k)
            in_ring += 1
    comps = disagreement_components(config, t1, t2, graph)
    comp_of = {g: c for c in comps for g in c}
    diff = set(t1.kept) ^ set(t2.kept)
    violations = [k for k in enclosed if k in diff]
    bad_comps = []
    for k in violations:
        if comp_of[k] not in bad_comps:
            bad_comps.append(comp_of[k])
    msg = "no enclosed grains" if not enclosed else f"{len(enclosed)} enclosed grains"
    return ShieldReport(enclosed, in_cube, in_ring, violations, bad_comps, msg)
