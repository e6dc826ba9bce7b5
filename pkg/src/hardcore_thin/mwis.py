"""Exact maximum-weight independent sets on grain overlap graphs.

Ties between co-optimal sets are broken deterministically: grains are ranked
by ``(center coordinates..., radius)`` and, of two sets with equal weight, the
one containing the lowest-ranked grain of their symmetric difference wins.
This is lexicographic order on the sorted sequences of grain keys where a
proper prefix ranks *after* its extensions; with that convention the rule
decomposes over connected components.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .graph import ContactGraph, build_contact_graph, connected_components
from .model import Configuration, WeightSpec

DEFAULT_CAP = 40
BRUTE_FORCE_LIMIT = 20


class ComponentTooLarge(Exception):
    def __init__(self, size: int, cap: int | None = None):
        self.size = size
        self.cap = cap
        super().__init__(f"component of {size} grains exceeds cap {cap}")


class TooManyGrains(Exception):
    pass


@dataclass(frozen=True)
class MwisResult:
    chosen: tuple
    total_weight: float
    optimal: bool = True


def grain_keys(config: Configuration, ids) -> list:
    return [tuple(config.centers[i].tolist()) + (float(config.radii[i]),) for i in ids]


def _rank_order(config: Configuration, ids) -> list:
    """``ids`` sorted by tie-break key (ties on identical keys by id)."""
    ids = list(ids)
    keys = grain_keys(config, ids)
    return [i for _, i in sorted(zip(keys, ids))]


def _prefer(w_new, m_new, w_best, m_best) -> bool:
    """True if (weight, mask) beats the incumbent; masks use rank-ordered bits."""
    if w_new != w_best:
        return w_new > w_best
    diff = m_new ^ m_best
    if not diff:
        return False
    return bool(m_new & diff & -diff)


def _mask_weight(mask: int, w: list) -> float:
    vals = []
    i = 0
    while mask:
        if mask & 1:
            vals.append(w[i])
        mask >>= 1
        i += 1
    return math.fsum(vals)


def _solve_component(w: list, nbr: list) -> int:
    """Branch and bound on one component; vertices are rank-ordered bits."""
    n = len(w)
    full = (1 << n) - 1
    closed = [nbr[v] | (1 << v) for v in range(n)]
    by_weight = sorted(range(n), key=lambda v: -w[v])

    def clique_bound(p: int) -> float:
        # greedy clique cover in descending weight; each clique contributes its max
        heads = []
        total = 0.0
        for v in by_weight:
            if not (p >> v) & 1:
                continue
            for idx, members in enumerate(heads):
                if members & ~nbr[v] == 0:
                    heads[idx] = members | (1 << v)
                    break
            else:
                heads.append(1 << v)
                total += w[v]
        return total

    best = [-1.0, 0]

    def visit(p: int, chosen: int, acc: float):
        if not p:
            val = _mask_weight(chosen, w)
            if _prefer(val, chosen, best[0], best[1]):
                best[0], best[1] = val, chosen
            return
        if best[0] >= 0 and (acc + clique_bound(p)) * (1 + 1e-9) < best[0]:
            return
        # vertices isolated inside p are taken outright
        iso = 0
        v_star, deg_star = -1, -1
        q = p
        while q:
            low = q & -q
            v = low.bit_length() - 1
            q ^= low
            deg = (nbr[v] & p).bit_count()
            if deg == 0:
                iso |= low
            elif deg > deg_star:
                v_star, deg_star = v, deg
        if iso:
            add = 0.0
            q = iso
            while q:
                low = q & -q
                add += w[low.bit_length() - 1]
                q ^= low
            visit(p & ~iso, chosen | iso, acc + add)
            return
        visit(p & ~closed[v_star], chosen | (1 << v_star), acc + w[v_star])
        visit(p & ~(1 << v_star), chosen, acc)

    visit(full, 0, 0.0)
    return best[1]


def _local_problem(comp, config, graph, h):
    order = _rank_order(config, comp)
    pos = {g: k for k, g in enumerate(order)}
    w = h.relative_values(config.radii[order], config.dim).tolist()
    nbr = []
    for g in order:
        m = 0
        for x in graph.adjacency[g]:
            k = pos.get(x)
            if k is not None:
                m |= 1 << k
        nbr.append(m)
    return order, w, nbr


def _result(config, h, chosen) -> MwisResult:
    chosen = tuple(sorted(chosen))
    total = math.fsum(h.values(config.radii[list(chosen)], config.dim).tolist()) if chosen else 0.0
    return MwisResult(chosen, total, True)


def solve_exact(ids, config: Configuration, h: WeightSpec, cap: int = DEFAULT_CAP,
                graph: ContactGraph | None = None) -> MwisResult:
    """Maximum total weight hard-core subset of ``ids``, solved per connected component."""
    graph = graph or build_contact_graph(config)
    chosen = []
    for comp in connected_components(graph, ids):
        if len(comp) > cap:
            raise ComponentTooLarge(len(comp), cap)
        if len(comp) == 1:
            chosen.append(comp[0])
            continue
        order, w, nbr = _local_problem(comp, config, graph, h)
        mask = _solve_component(w, nbr)
        chosen.extend(order[k] for k in range(len(order)) if (mask >> k) & 1)
    return _result(config, h, chosen)


def brute_force(ids, config: Configuration, h: WeightSpec,
                graph: ContactGraph | None = None) -> MwisResult:
    """Exhaustive search over all 2^n subsets of ``ids`` (test oracle, n <= 20)."""
    ids = sorted(set(int(i) for i in ids))
    if len(ids) > BRUTE_FORCE_LIMIT:
        raise TooManyGrains(f"{len(ids)} grains exceed the brute-force limit {BRUTE_FORCE_LIMIT}")
    if not ids:
        return MwisResult((), 0.0, True)
    graph = graph or build_contact_graph(config)
    order = _rank_order(config, ids)
    pos = {g: k for k, g in enumerate(order)}
    n = len(order)
    w = h.relative_values(config.radii[order], config.dim)
    masks = np.arange(1 << n, dtype=np.int64)
    bad = np.zeros(masks.size, dtype=bool)
    for g in order:
        for x in graph.adjacency[g]:
            if x in pos and pos[x] > pos[g]:
                bad |= ((masks >> pos[g]) & (masks >> pos[x]) & 1).astype(bool)
    total = np.zeros(masks.size)
    for k in range(n):
        total += ((masks >> k) & 1) * w[k]
    total[bad] = -1.0
    top = total.max()
    best_w, best_m = -1.0, 0
    wl = w.tolist()
    for m in masks[total >= top * (1 - 1e-9)].tolist():
        val = _mask_weight(m, wl)
        if _prefer(val, m, best_w, best_m):
            best_w, best_m = val, m
    return _result(config, h, [order[k] for k in range(n) if (best_m >> k) & 1])
