"""Hard-core thinnings: Matern I, per-component maxima, Voronoi cell
constructions and swap-based local improvement."""

from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .graph import ContactGraph, build_contact_graph, connected_components
from .model import Configuration, Window, WeightSpec
from .mwis import DEFAULT_CAP, solve_exact

LOCAL_CERTIFICATE = "(s_max, m)-local maximality"


@dataclass(frozen=True)
class Thinning:
    kept: tuple
    source: str
    hard_core: bool
    info: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "kept", tuple(sorted(int(k) for k in self.kept)))


def is_hard_core(graph: ContactGraph, kept) -> bool:
    kept = set(kept)
    return all(not (graph.neighbor_sets[k] & kept) for k in kept)


def total_weight(config: Configuration, ids, h: WeightSpec) -> float:
    ids = list(ids)
    if not ids:
        return 0.0
    return math.fsum(h.values(config.radii[ids], config.dim).tolist())


def matern_one(config: Configuration, graph: ContactGraph | None = None) -> Thinning:
    """Keep exactly the grains that overlap no other grain."""
    graph = graph or build_contact_graph(config)
    kept = [i for i, a in enumerate(graph.adjacency) if not a]
    return Thinning(tuple(kept), "matern_one", True)


def component_max(config: Configuration, h: WeightSpec, cap: int = DEFAULT_CAP,
                  graph: ContactGraph | None = None) -> Thinning:
    """Exact maximum-weight hard-core subset of every connected component."""
    graph = graph or build_contact_graph(config)
    res = solve_exact(range(len(config)), config, h, cap, graph=graph)
    return Thinning(res.chosen, "component_max", True)


# --------------------------------------------------------------------------
# Voronoi tessellations


def _image_offsets(dim: int, reach: int = 1) -> np.ndarray:
    return np.array(list(itertools.product(range(-reach, reach + 1), repeat=dim)), dtype=float)


@dataclass(frozen=True, eq=False)
class Tessellation:
    """Nearest-seed cells in the window metric; ties go to the lowest seed index."""

    seeds: np.ndarray
    window: Window

    def __post_init__(self):
        seeds = np.array(self.seeds, dtype=float).reshape(-1, self.window.dim)
        if seeds.shape[0] == 0:
            raise ValueError("a tessellation needs at least one seed")
        seeds.setflags(write=False)
        object.__setattr__(self, "seeds", seeds)

    def __len__(self):
        return self.seeds.shape[0]

    def cell_of(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        out = np.empty(pts.shape[0], dtype=int)
        for lo in range(0, pts.shape[0], 4096):
            chunk = pts[lo:lo + 4096]
            delta = self.window.displacement(self.seeds[None, :, :] - chunk[:, None, :])
            d2 = np.einsum("ijk,ijk->ij", delta, delta)
            out[lo:lo + 4096] = np.argmin(d2, axis=1)
        return out

    def region_inside_cell(self, points, cells, corners=None, radii=None) -> np.ndarray:
        """Whether balls (``radii``) or boxes (``corners`` offsets) about ``points``
        lie inside the given cells.

        A ball is inside cell i when its center is at signed distance >= r from
        the bisector of the seed i image nearest to the center and every image of
        every other seed. Polytopes are tested on their vertices. On the torus the
        test is exact while the region is within L/2 of its seed image, and
        conservative beyond.
        """
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        cells = np.asarray(cells, dtype=int)
        n, d = pts.shape
        k = len(self)
        inside = np.ones(n, dtype=bool)
        if k == 1 or n == 0:
            return inside
        win = self.window
        reach = 1
        if corners is not None and win.is_torus:
            extent = float(np.abs(corners).max()) * math.sqrt(d)
            reach = 1 + int(math.ceil(extent / win.size))
        offsets = _image_offsets(d, reach) * win.size if win.is_torus else np.zeros((1, d))
        for idx in range(n):
            x = pts[idx]
            i = cells[idx]
            own = x + win.displacement(self.seeds[i] - x)
            others = np.delete(np.arange(k), i)
            base = x + win.displacement(self.seeds[others] - x)
            comp = (base[:, None, :] + offsets[None, :, :]).reshape(-1, d)
            normal = comp - own
            norm = np.linalg.norm(normal, axis=1)
            mid = 0.5 * (comp + own)
            if radii is not None:
                # signed distance from x to each bisector, positive on own side
                sd = np.einsum("ij,ij->i", mid - x, normal) / norm
                inside[idx] = bool(np.all(sd >= radii[idx]))
            else:
                verts = x + corners
                sd = (np.einsum("ij,ij->i", mid, normal)[None, :] - verts @ normal.T) / norm[None, :]
                inside[idx] = bool(np.all(sd >= 0))
        return inside

    def ball_cells(self, config: Configuration):
        """(cell of each grain center, whether each ball lies inside that cell)."""
        cells = self.cell_of(config.centers) if len(config) else np.zeros(0, dtype=int)
        inside = self.region_inside_cell(config.centers, cells, radii=config.radii)
        return cells, inside


def sample_voronoi(window: Window, seed_intensity: float, seed: int) -> Tessellation:
    """Poisson-Voronoi tessellation; a seedless draw is redrawn from the next substream."""
    if not seed_intensity > 0:
        raise ValueError("seed intensity must be positive")
    for attempt in itertools.count():
        rng = np.random.default_rng([int(seed) & 0xFFFFFFFFFFFFFFFF, attempt])
        n = int(rng.poisson(seed_intensity * window.volume))
        if n > 0:
            return Tessellation(window.sample_uniform(rng, n), window)


def _per_cell_max(config, cells, eligible, h, cap, graph, source, hard_core=None):
    kept = []
    for c in np.unique(cells[eligible]):
        ids = np.nonzero(eligible & (cells == c))[0]
        kept.extend(solve_exact(ids.tolist(), config, h, cap, graph=graph).chosen)
    if hard_core is None:
        hard_core = is_hard_core(graph, kept)
    return Thinning(tuple(kept), source, hard_core)


def thin_minus(config: Configuration, tess: Tessellation, h: WeightSpec, cap: int = DEFAULT_CAP,
               graph: ContactGraph | None = None, cells=None) -> Thinning:
    """Per-cell optimum over grains entirely inside their cell; always hard-core."""
    graph = graph or build_contact_graph(config)
    cells, inside = cells if cells is not None else tess.ball_cells(config)
    return _per_cell_max(config, cells, inside, h, cap, graph, "thin_minus", True)


def thin_plus(config: Configuration, tess: Tessellation, h: WeightSpec, cap: int = DEFAULT_CAP,
              graph: ContactGraph | None = None, cells=None) -> Thinning:
    """Per-cell optimum over grains centered in the cell; overlaps across cells allowed."""
    graph = graph or build_contact_graph(config)
    if cells is None:
        cell_idx = tess.cell_of(config.centers) if len(config) else np.zeros(0, dtype=int)
    else:
        cell_idx = cells[0]
    eligible = np.ones(len(config), dtype=bool)
    return _per_cell_max(config, cell_idx, eligible, h, cap, graph, "thin_plus")


@dataclass
class CellReport:
    cell: int
    plus_weight: float
    minus_weight: float
    boundary_weight: float

    @property
    def slack(self) -> float:
        return self.boundary_weight - (self.plus_weight - self.minus_weight)


def window_inequality_check(config: Configuration, t: Thinning | None, tess: Tessellation,
                            h: WeightSpec, m: float | None = None, cap: int = DEFAULT_CAP,
                            graph: ContactGraph | None = None) -> dict:
    """Cellwise surface bound: plus-weight minus minus-weight is at most the weight of
    grains centered in the cell whose ball crosses the cell boundary.

    ``t`` (a hard-core thinning of the same configuration) is additionally
    compared against the plus construction restricted to grains inside cells.
    """
    graph = graph or build_contact_graph(config)
    cells, inside = tess.ball_cells(config)
    plus = thin_plus(config, tess, h, cap, graph, (cells, inside))
    minus = thin_minus(config, tess, h, cap, graph, (cells, inside))
    plus_set, minus_set = set(plus.kept), set(minus.kept)
    w = h.values(config.radii, config.dim)
    reports = []
    for c in range(len(tess)):
        ids = np.nonzero(cells == c)[0]
        reports.append(CellReport(
            c,
            math.fsum(w[i] for i in ids if i in plus_set),
            math.fsum(w[i] for i in ids if i in minus_set),
            math.fsum(w[i] for i in ids if not inside[i]),
        ))
    # cells are exact integers of float sums; allow rounding noise only
    tol = 1e-9 * max(1.0, float(w.sum()) if len(w) else 1.0)
    violations = [r.cell for r in reports if r.slack < -tol]
    out = {
        "cells": reports,
        "slack": [r.slack for r in reports],
        "violations": violations,
        "holds": not violations,
        "plus_weight": math.fsum(r.plus_weight for r in reports),
        "minus_weight": math.fsum(r.minus_weight for r in reports),
        "plus": plus,
        "minus": minus,
    }
    if t is not None:
        inner = [k for k in t.kept if inside[k]]
        out["thinning_inner_weight"] = total_weight(config, inner, h)
        out["thinning_bounded_by_plus"] = out["thinning_inner_weight"] <= out["plus_weight"] + tol
    return out


# --------------------------------------------------------------------------
# swaps


@dataclass(frozen=True)
class Swap:
    remove: tuple
    add: tuple

    def __post_init__(self):
        object.__setattr__(self, "remove", tuple(sorted(self.remove)))
        object.__setattr__(self, "add", tuple(sorted(self.add)))
        if set(self.remove) & set(self.add):
            raise ValueError("remove and add sets must be disjoint")


class SwapSearch:
    """Enumerates irreducible swaps: an independent add-set A of excluded grains
    together with the kept grains R overlapping A, connected through R, with
    |A|, |R| <= s_max and every ball inside a common cube of side m centered at
    some grain center.

    Any valid swap splits into such connected pieces, at least one of which is
    itself valid, so searching them decides existence exactly.
    """

    def __init__(self, config: Configuration, graph: ContactGraph, h: WeightSpec,
                 m: float, s_max: int):
        if s_max < 1:
            raise ValueError("s_max must be >= 1")
        if not m > 0:
            raise ValueError("m must be positive")
        self.config = config
        self.graph = graph
        self.h = h
        self.m = float(m)
        self.s_max = int(s_max)
        self.nbrs = graph.neighbor_sets
        self.exp = h.kind == "exp"
        if self.exp:
            self.logw = h.log_values(config.radii, config.dim).tolist()
        else:
            self.w = h.values(config.radii, config.dim).tolist()
        self.win = config.window
        self.half = self.m / 2.0
        # an unbounded cube, or one covering the whole torus: every ball fits
        self.trivial_cube = math.isinf(self.m) or (
            self.win.is_torus and self.half >= self.win.size / 2 + float(
                config.radii.max() if len(config) else 0.0))

    # gains are (reference log-weight, scaled gain); true gain = exp(ref) * scaled
    def gain(self, add, remove):
        if not self.exp:
            return 0.0, math.fsum([self.w[i] for i in add] + [-self.w[i] for i in remove])
        ref = max(self.logw[i] for i in itertools.chain(add, remove))
        return ref, math.fsum([math.exp(self.logw[i] - ref) for i in add]
                              + [-math.exp(self.logw[i] - ref) for i in remove])

    @staticmethod
    def gain_key(g) -> float:
        ref, scaled = g
        return ref + math.log(scaled) if scaled > 0 else -math.inf

    def _better(self, g1, key1, g2, key2) -> bool:
        if g2 is None:
            return True
        if g1[0] == g2[0]:
            if g1[1] != g2[1]:
                return g1[1] > g2[1]
        else:
            k1, k2 = self.gain_key(g1), self.gain_key(g2)
            if k1 != k2:
                return k1 > k2
        return key1 < key2

    def cube_contains(self, center, ids) -> bool:
        if self.trivial_cube:
            return True
        c = self.config.centers
        delta = self.win.displacement(c[list(ids)] - c[center])
        ext = np.abs(delta) + self.config.radii[list(ids)][:, None]
        return bool(np.all(ext <= self.half))

    def _fits_some_cube(self, lo, hi) -> bool:
        if self.trivial_cube:
            return True
        box_lo = hi - self.half
        box_hi = lo + self.half
        if np.any(box_lo > box_hi):
            return False
        mid = 0.5 * (box_lo + box_hi)
        halfw = 0.5 * (box_hi - box_lo)
        delta = self.win.displacement(self.config.centers - mid)
        return bool(np.any(np.all(np.abs(delta) <= halfw + 1e-12, axis=1)))

    def parts(self, seed: int, kept: set, allowed=None):
        """Irreducible swaps whose add-set contains ``seed``.

        Yields (add frozenset, remove frozenset, lifted lower corner, upper corner).
        """
        s = self.s_max
        nbrs = self.nbrs
        cen = self.config.centers
        rad = self.config.radii
        win = self.win
        if seed in kept or (allowed is not None and seed not in allowed):
            return
        start_r = nbrs[seed] & kept
        if len(start_r) > s or (allowed is not None and not start_r <= allowed):
            return
        lifted = {seed: cen[seed].copy()}
        for r in start_r:
            lifted[r] = lifted[seed] + win.displacement(cen[r] - cen[seed])

        def box(members):
            pts = np.array([lifted[x] for x in members])
            rr = rad[list(members)][:, None]
            return (pts - rr).min(axis=0), (pts + rr).max(axis=0)

        first = (frozenset([seed]), frozenset(start_r))
        seen = {first[0]}
        stack = [first]
        while stack:
            A, R = stack.pop()
            lo, hi = box(A | R)
            if np.any(hi - lo > self.m) and not self.trivial_cube:
                continue
            yield A, R, lo, hi
            if len(A) >= s:
                continue
            blocked = set(A)
            for x in A:
                blocked |= nbrs[x]
            cands = set()
            for r in R:
                cands |= nbrs[r]
            cands -= kept
            cands -= blocked
            for b in sorted(cands):
                if allowed is not None and b not in allowed:
                    continue
                A2 = A | {b}
                if A2 in seen:
                    continue
                seen.add(A2)
                new_r = (nbrs[b] & kept) - R
                if len(R) + len(new_r) > s:
                    continue
                if allowed is not None and not new_r <= allowed:
                    continue
                anchor = next(iter(nbrs[b] & R))
                lifted[b] = lifted[anchor] + win.displacement(cen[b] - cen[anchor])
                for r in new_r:
                    lifted[r] = lifted[b] + win.displacement(cen[r] - cen[b])
                stack.append((A2, R | new_r))

    def best_part(self, seed: int, kept: set, allowed=None, need_cube=True):
        best = None
        for A, R, lo, hi in self.parts(seed, kept, allowed):
            g = self.gain(A, R)
            if not g[1] > 0:
                continue
            key = (tuple(sorted(A)), tuple(sorted(R)))
            if best is not None and not self._better(g, key, best[0], best[1]):
                continue
            if need_cube and not self._fits_some_cube(lo, hi):
                continue
            best = (g, key)
        return best


def _state(config, t, h, m, s_max, graph):
    graph = graph or build_contact_graph(config)
    return graph, SwapSearch(config, graph, h, m, s_max)


def find_valid_swap(config: Configuration, t: Thinning, h: WeightSpec, center: int, m: float,
                    s_max: int, graph: ContactGraph | None = None) -> Swap | None:
    """Best valid swap with every involved ball inside the side-m cube at ``center``.

    Maximizes the weight gain over irreducible swaps; ties go to the
    lexicographically smallest (add ids, remove ids). ``None`` if no valid swap.
    """
    if not t.hard_core:
        raise ValueError("swap search needs a hard-core thinning")
    graph, search = _state(config, t, h, m, s_max, graph)
    kept = set(t.kept)
    if search.trivial_cube:
        allowed = None
    else:
        delta = config.window.displacement(config.centers - config.centers[center])
        ext = np.abs(delta) + config.radii[:, None]
        allowed = set(np.nonzero(np.all(ext <= search.half, axis=1))[0].tolist())
    best = None
    seeds = range(len(config)) if allowed is None else sorted(allowed)
    for a in seeds:
        cand = search.best_part(a, kept, allowed, need_cube=False)
        if cand is not None and (best is None or search._better(cand[0], cand[1], best[0], best[1])):
            best = cand
    if best is None:
        return None
    add, remove = best[1]
    return Swap(remove, add)


def apply_swap(t: Thinning, swap: Swap, source: str | None = None) -> Thinning:
    kept = (set(t.kept) - set(swap.remove)) | set(swap.add)
    return Thinning(tuple(kept), source or t.source, t.hard_core, dict(t.info))


def _ball_of(graph: ContactGraph, sources, radius: int) -> set:
    seen = set(sources)
    frontier = set(sources)
    for _ in range(radius):
        nxt = set()
        for v in frontier:
            nxt |= graph.neighbor_sets[v]
        nxt -= seen
        if not nxt:
            break
        seen |= nxt
        frontier = nxt
    return seen


def local_improve(config: Configuration, t0: Thinning, h: WeightSpec, m: float, s_max: int,
                  max_rounds: int = 1_000_000, graph: ContactGraph | None = None) -> Thinning:
    """Apply valid swaps until none is left (or ``max_rounds``).

    Swaps come off a queue ordered by gain; queue entries near an applied swap
    are recomputed before use and a final sweep over all seeds confirms that
    no valid swap remains.

    The result carries ``info['rounds']`` (swaps applied) and
    ``info['converged']`` (no valid swap remains).
    """
    if not t0.hard_core:
        raise ValueError("local improvement needs a hard-core start")
    graph, search = _state(config, t0, h, m, s_max, graph)
    kept = set(t0.kept)
    dirty = [False] * len(config)
    heap = []

    def push(a):
        dirty[a] = False
        best = search.best_part(a, kept)
        if best is not None:
            g, key = best
            heapq.heappush(heap, (-search.gain_key(g), key, a))

    rounds = 0
    converged = True
    while True:
        # a full sweep after the queue drains certifies that no swap remains
        for a in range(len(config)):
            if a not in kept:
                push(a)
        if not heap:
            break
        while heap:
            _, key, a = heapq.heappop(heap)
            if a in kept:
                continue
            if dirty[a]:
                # stale: a nearby swap may have changed this seed's options
                push(a)
                continue
            if rounds >= max_rounds:
                converged = False
                heap.clear()
                break
            add, remove = key
            kept.difference_update(remove)
            kept.update(add)
            rounds += 1
            for b in _ball_of(graph, set(add) | set(remove), 2 * s_max):
                dirty[b] = True
        if not converged:
            break
    info = {"rounds": rounds, "converged": converged, "s_max": s_max, "m": m,
            "certificate": LOCAL_CERTIFICATE, "start": t0.source}
    return Thinning(tuple(kept), "local_improve", True, info)


def is_locally_maximal(config: Configuration, t: Thinning, h: WeightSpec, m: float, s_max: int,
                       graph: ContactGraph | None = None) -> bool:
    """Whether no valid swap of size <= s_max fits a side-m cube about any grain center."""
    if not t.hard_core:
        raise ValueError("local maximality is defined for hard-core thinnings")
    graph, search = _state(config, t, h, m, s_max, graph)
    kept = set(t.kept)
    return all(search.best_part(a, kept) is None for a in range(len(config)) if a not in kept)
