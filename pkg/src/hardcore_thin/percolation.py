"""Red/green/uncolored continuum percolation and crossing probabilities.

Every grain carries two uniform marks. A grain is red when its activation
mark is >= p and active otherwise; an active special dispensable grain is green
when its green mark is >= q. Uncolored grains (active and not green) are the
ones that may carry a crossing. Reusing the marks across (p, q) couples all
parameter values on one realization.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

import numpy as np

from .dispensable import PARSES, _check_radii, _special
from .graph import ContactGraph, build_contact_graph
from .model import Configuration, RadiusLaw, Window, sample_poisson

RED, GREEN, UNCOLORED = "red", "green", "uncolored"


@dataclass(frozen=True, eq=False)
class ColoredConfiguration:
    base: Configuration
    color: tuple
    activation_marks: np.ndarray
    green_marks: np.ndarray
    special: np.ndarray
    p: float
    q: float
    parse: str = "verbatim"

    @property
    def uncolored(self) -> np.ndarray:
        return np.array([c == UNCOLORED for c in self.color], dtype=bool)

    @property
    def active(self) -> np.ndarray:
        return self.activation_marks < self.p


def draw_marks(n: int, seed: int) -> tuple:
    """Activation and green marks for ``n`` grains from one substream of ``seed``."""
    rng = np.random.default_rng([int(seed), 1])
    return rng.random(n), rng.random(n)


def _check_window(config: Configuration) -> None:
    if config.window.is_torus:
        raise ValueError("coloring needs a free-ball window")


def color_with_marks(config: Configuration, p: float, q: float, activation_marks, green_marks,
                     graph: ContactGraph | None = None, parse: str = "verbatim"
                     ) -> ColoredConfiguration:
    if not (0 < p < 1 and 0 < q < 1):
        raise ValueError("p and q must lie in (0, 1)")
    if parse not in PARSES:
        raise ValueError(f"unknown parse {parse!r}; expected one of {PARSES}")
    _check_window(config)
    _check_radii(config)
    graph = graph or build_contact_graph(config)
    act = np.asarray(activation_marks, dtype=float)
    grn = np.asarray(green_marks, dtype=float)
    active = act < p
    special = np.zeros(len(config), dtype=bool)
    colors = []
    for k in range(len(config)):
        if not active[k]:
            colors.append(RED)
            continue
        special[k] = _special(k, config, graph, active, parse)
        colors.append(GREEN if special[k] and grn[k] >= q else UNCOLORED)
    return ColoredConfiguration(config, tuple(colors), act, grn, special, p, q, parse)


def color(config: Configuration, p: float, q: float, seed: int,
          graph: ContactGraph | None = None, parse: str = "verbatim") -> ColoredConfiguration:
    """Color ``config`` with marks drawn from ``seed``.

    Special dispensability is evaluated among the grains of ``config`` only
    (all centered in the window ball).
    """
    if parse not in PARSES:
        raise ValueError(f"unknown parse {parse!r}; expected one of {PARSES}")
    act, grn = draw_marks(len(config), seed)
    return color_with_marks(config, p, q, act, grn, graph, parse)


def crossing_from_mask(config: Configuration, open_mask, n: float,
                       graph: ContactGraph | None = None) -> bool:
    """Whether open grains connect a center in B_1(o) to a center in B_n(o) minus B_{n-1}(o)."""
    graph = graph or build_contact_graph(config)
    norms = np.linalg.norm(config.centers, axis=1)
    open_mask = np.asarray(open_mask, dtype=bool)
    inside = norms <= n
    ok = open_mask & inside
    starts = np.nonzero(ok & (norms <= 1.0))[0].tolist()
    target = ok & (norms > n - 1)
    seen = set(starts)
    queue = deque(starts)
    while queue:
        v = queue.popleft()
        if target[v]:
            return True
        for w in graph.adjacency[v]:
            if ok[w] and w not in seen:
                seen.add(w)
                queue.append(w)
    return False


def crossing(colored: ColoredConfiguration, n: float | None = None,
             graph: ContactGraph | None = None) -> bool:
    win = colored.base.window
    n = win.size if n is None else n
    if win.is_torus or n > win.size:
        raise ValueError("crossing needs a free-ball window of radius >= n")
    return crossing_from_mask(colored.base, colored.uncolored, n, graph)


def replicate_seeds(seed: int, replicates: int) -> list:
    ss = np.random.SeedSequence([int(seed), 0x7E7A])
    return [int(c.generate_state(1, dtype=np.uint64)[0]) for c in ss.spawn(replicates)]


def crossing_grid(n: float, intensity: float, law: RadiusLaw, ps, qs, seed: int, dim: int = 2,
                  parse: str = "verbatim") -> np.ndarray:
    """Crossing indicators on one realization for every (p, q), sharing marks."""
    window = Window.free_ball(n, dim)
    config = sample_poisson(intensity, law, window, seed)
    graph = build_contact_graph(config)
    act, grn = draw_marks(len(config), seed)
    out = np.zeros((len(ps), len(qs)), dtype=bool)
    for i, p in enumerate(ps):
        for j, q in enumerate(qs):
            col = color_with_marks(config, p, q, act, grn, graph, parse)
            out[i, j] = crossing_from_mask(config, col.uncolored, n, graph)
    return out


def estimate_theta(n: float, intensity: float, law: RadiusLaw, p: float, q: float,
                   replicates: int, seed: int, dim: int = 2, parse: str = "verbatim") -> tuple:
    """Crossing frequency over independent replicates and its 95% normal half-width."""
    if replicates < 100:
        raise ValueError("at least 100 replicates are required")
    hits = sum(bool(crossing_grid(n, intensity, law, [p], [q], s, dim, parse)[0, 0])
               for s in replicate_seeds(seed, replicates))
    est = hits / replicates
    return est, 1.96 * math.sqrt(est * (1 - est) / replicates)


def estimate_theta_grid(n: float, intensity: float, law: RadiusLaw, ps, qs, replicates: int,
                        seed: int, dim: int = 2, parse: str = "verbatim") -> tuple:
    """Shared-marks estimates over a (p, q) grid.

    Returns (estimates, half-widths, per-replicate indicators of shape
    (replicates, len(ps), len(qs))).
    """
    if replicates < 100:
        raise ValueError("at least 100 replicates are required")
    ind = np.stack([crossing_grid(n, intensity, law, ps, qs, s, dim, parse)
                    for s in replicate_seeds(seed, replicates)])
    est = ind.mean(axis=0)
    return est, 1.96 * np.sqrt(est * (1 - est) / replicates), ind
