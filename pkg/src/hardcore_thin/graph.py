"""Contact graph, connected components and the directed smaller-to-larger graph."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components as _cc

from .model import Configuration, Window


class GridIndex:
    """Uniform grid over grain centers with cell side >= the interaction range.

    On a torus the grid wraps; in a free window the grid covers the bounding
    box and out-of-range neighbor cells are simply empty.
    """

    def __init__(self, centers: np.ndarray, window: Window, cell: float):
        self.window = window
        self.centers = centers
        d = window.dim
        n = centers.shape[0]
        if window.is_torus:
            L = window.size
            self.shape = np.maximum(1, np.floor(L / cell).astype(int)) * np.ones(d, dtype=int)
            self.cell = L / self.shape
            self.origin = np.zeros(d)
        else:
            lo = centers.min(axis=0) if n else np.zeros(d)
            hi = centers.max(axis=0) if n else np.zeros(d)
            self.cell = np.full(d, cell, dtype=float)
            self.origin = lo
            self.shape = np.floor((hi - lo) / cell).astype(int) + 1
        coords = np.floor((centers - self.origin) / self.cell).astype(int)
        if window.is_torus:
            coords %= self.shape
        else:
            coords = np.minimum(coords, self.shape - 1)
        self.coords = coords
        self.strides = np.cumprod(np.concatenate(([1], self.shape[:-1])))
        cell_id = coords @ self.strides if n else np.zeros(0, dtype=int)
        self.order = np.argsort(cell_id, kind="stable")
        ncell = int(np.prod(self.shape))
        counts = np.bincount(cell_id, minlength=ncell)
        self.start = np.concatenate(([0], np.cumsum(counts)))

    def _offsets(self):
        per_axis = []
        for k in range(self.window.dim):
            if self.window.is_torus:
                per_axis.append(sorted({o % self.shape[k] for o in (-1, 0, 1)}))
            else:
                per_axis.append([-1, 0, 1])
        return list(itertools.product(*per_axis))

    def candidate_pairs(self):
        """All pairs (i, j), i < j, whose cells are neighbors (each pair once)."""
        n = self.centers.shape[0]
        if n < 2:
            return np.zeros(0, dtype=int), np.zeros(0, dtype=int)
        out_i, out_j = [], []
        for off in self._offsets():
            nc = self.coords + np.asarray(off)
            if self.window.is_torus:
                nc %= self.shape
                valid = np.ones(n, dtype=bool)
            else:
                valid = np.all((nc >= 0) & (nc < self.shape), axis=1)
            src = np.nonzero(valid)[0]
            cid = nc[valid] @ self.strides
            lo, hi = self.start[cid], self.start[cid + 1]
            counts = hi - lo
            i_rep = np.repeat(src, counts)
            base = np.repeat(lo - np.concatenate(([0], np.cumsum(counts)[:-1])), counts)
            j_rep = self.order[base + np.arange(counts.sum())]
            keep = i_rep < j_rep
            out_i.append(i_rep[keep])
            out_j.append(j_rep[keep])
        i = np.concatenate(out_i)
        j = np.concatenate(out_j)
        # several offsets can land in the same cell when the grid is narrow
        key = np.unique(i * n + j)
        return key // n, key % n


def overlap_pairs(config: Configuration):
    """Sorted arrays (i, j), i < j, of grains with overlapping interiors."""
    n = len(config)
    if n < 2:
        return np.zeros(0, dtype=int), np.zeros(0, dtype=int)
    rmax = float(config.radii.max())
    grid = GridIndex(config.centers, config.window, 2.0 * rmax)
    i, j = grid.candidate_pairs()
    delta = config.window.displacement(config.centers[j] - config.centers[i])
    dist2 = np.einsum("ij,ij->i", delta, delta)
    reach = config.radii[i] + config.radii[j]
    keep = dist2 < reach * reach
    return i[keep], j[keep]


@dataclass(frozen=True, eq=False)
class ContactGraph:
    """Undirected overlap graph; ``adjacency[i]`` is the sorted neighbor tuple of grain i."""

    adjacency: tuple
    edges_i: np.ndarray
    edges_j: np.ndarray

    def __len__(self):
        return len(self.adjacency)

    @cached_property
    def neighbor_sets(self) -> tuple:
        return tuple(frozenset(a) for a in self.adjacency)

    @cached_property
    def degree(self) -> np.ndarray:
        return np.array([len(a) for a in self.adjacency], dtype=int)

    def has_edge(self, i: int, j: int) -> bool:
        return j in self.neighbor_sets[i]


def _adjacency_from_edges(n, ei, ej):
    adj = [[] for _ in range(n)]
    for a, b in zip(ei.tolist(), ej.tolist()):
        adj[a].append(b)
        adj[b].append(a)
    return tuple(tuple(sorted(a)) for a in adj)


def build_contact_graph(config: Configuration) -> ContactGraph:
    ei, ej = overlap_pairs(config)
    return ContactGraph(_adjacency_from_edges(len(config), ei, ej), ei, ej)


def connected_components(graph: ContactGraph, ids=None) -> list:
    """Maximal connected vertex sets, each a sorted list, ordered by smallest member.

    With ``ids`` given, components of the induced subgraph on ``ids``.
    """
    n = len(graph)
    if ids is None:
        nodes = np.arange(n)
        ei, ej = graph.edges_i, graph.edges_j
    else:
        nodes = np.array(sorted(set(int(i) for i in ids)), dtype=int)
        member = np.zeros(n, dtype=bool)
        member[nodes] = True
        keep = member[graph.edges_i] & member[graph.edges_j]
        ei, ej = graph.edges_i[keep], graph.edges_j[keep]
    if nodes.size == 0:
        return []
    local = np.full(n, -1, dtype=int)
    local[nodes] = np.arange(nodes.size)
    m = nodes.size
    mat = coo_matrix((np.ones(ei.size), (local[ei], local[ej])), shape=(m, m))
    _, labels = _cc(mat, directed=False)
    groups = {}
    for node, lab in zip(nodes.tolist(), labels.tolist()):
        groups.setdefault(lab, []).append(node)
    return sorted(groups.values(), key=lambda c: c[0])


@dataclass(frozen=True, eq=False)
class DirectedGraph:
    """Edge i -> j iff grains i and j overlap and radius(i) < radius(j)."""

    out_edges: tuple

    def __len__(self):
        return len(self.out_edges)


def build_directed_graph(config: Configuration, contact: ContactGraph | None = None) -> DirectedGraph:
    contact = contact or build_contact_graph(config)
    r = config.radii
    out = [[] for _ in range(len(config))]
    for a, b in zip(contact.edges_i.tolist(), contact.edges_j.tolist()):
        if r[a] < r[b]:
            out[a].append(b)
        elif r[b] < r[a]:
            out[b].append(a)
    return DirectedGraph(tuple(tuple(sorted(o)) for o in out))


def cluster(k: int, g: DirectedGraph) -> set:
    """All grains reachable from ``k`` along directed edges, ``k`` included."""
    if not 0 <= k < len(g):
        raise KeyError(f"unknown grain id {k}")
    seen = {k}
    stack = [k]
    while stack:
        v = stack.pop()
        for w in g.out_edges[v]:
            if w not in seen:
                seen.add(w)
                stack.append(w)
    return seen
