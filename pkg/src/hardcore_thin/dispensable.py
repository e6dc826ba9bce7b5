"""Dispensable and special dispensable grains, and the filter removing dispensable grains.

A grain K is dispensable when some heavier grain K' overlaps it and every
grain overlapping K' also overlaps K (or is K). Swapping K for K' then never
breaks the hard-core property, so no locally maximal thinning keeps K.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import ContactGraph, build_contact_graph
from .model import Configuration, WeightSpec

SPECIAL_RADIUS = 1.05
SPECIAL_MAX_LARGE = 3
PARSES = ("verbatim", "active-only")


class RadiusLawMismatch(ValueError):
    pass


@dataclass(frozen=True)
class DispensabilityReport:
    """``special_without_weight_clause`` flags grains meeting the special
    conditions whose witnesses are all lighter or equal, so that they are not
    dispensable; such grains break the expected special => dispensable link."""

    grain: int
    dispensable: bool
    witness: int | None
    special: bool
    boundary_affected: bool = False
    special_without_weight_clause: bool = False


def _covered(graph: ContactGraph, k: int, kp: int) -> bool:
    """Every grain overlapping ``kp`` also overlaps ``k`` or is ``k``."""
    return graph.neighbor_sets[kp] <= graph.neighbor_sets[k] | {k}


def _near_edge(config: Configuration, k: int) -> bool:
    win = config.window
    if win.is_torus:
        return False
    reach = float(np.linalg.norm(config.centers[k])) + config.radii[k] + config.radii.max()
    return bool(reach > win.size)


def _witness(k, key, graph):
    best = None
    for kp in sorted(graph.neighbor_sets[k]):
        if not key[k] < key[kp] or not _covered(graph, k, kp):
            continue
        if best is None or key[kp] > key[best]:
            best = kp
    return best


def _check_radii(config: Configuration) -> None:
    if len(config) and float(config.radii.min()) < 1.0:
        raise RadiusLawMismatch(
            f"special dispensability needs radii in [1, m]; found {float(config.radii.min())}")


def is_special_dispensable(k: int, config: Configuration, graph: ContactGraph | None = None,
                           active=None, parse: str = "verbatim") -> bool:
    """Special dispensability of grain ``k``.

    Conditions: radius below 1.05; an overlapping grain K' != k (active when
    ``active`` is given) whose overlaps are all overlaps of k; k overlaps no grain
    of radius below 1.05 and at most 3 grains of radius above 1.05. The weight
    comparison of plain dispensability is not part of the list.

    With ``active`` (boolean per grain), k itself must be active. Under
    ``parse="verbatim"`` the two radius counts use every grain; under
    ``"active-only"`` they use active grains only.
    """
    if parse not in PARSES:
        raise ValueError(f"unknown parse {parse!r}; expected one of {PARSES}")
    _check_radii(config)
    graph = graph or build_contact_graph(config)
    return _special(k, config, graph, active, parse)


def _special(k, config, graph, active, parse) -> bool:
    r = config.radii
    if not r[k] < SPECIAL_RADIUS:
        return False
    if active is not None and not active[k]:
        return False
    pool = graph.neighbor_sets[k]
    if active is not None and parse == "active-only":
        pool = [j for j in pool if active[j]]
    if any(r[j] < SPECIAL_RADIUS for j in pool):
        return False
    if sum(1 for j in pool if r[j] > SPECIAL_RADIUS) > SPECIAL_MAX_LARGE:
        return False
    for kp in graph.neighbor_sets[k]:
        if active is not None and not active[kp]:
            continue
        if _covered(graph, k, kp):
            return True
    return False


def is_dispensable(k: int, config: Configuration, h: WeightSpec,
                   graph: ContactGraph | None = None) -> DispensabilityReport:
    """Dispensability of grain ``k``; the witness is the heaviest qualifying K'
    (lowest id among equals). ``special`` is evaluated only when all radii are >= 1."""
    if not 0 <= k < len(config):
        raise KeyError(f"unknown grain id {k}")
    graph = graph or build_contact_graph(config)
    witness = _witness(k, h.order_key(config.radii), graph)
    special = False
    if len(config) and float(config.radii.min()) >= 1.0:
        special = is_special_dispensable(k, config, graph)
    dispensable = witness is not None
    return DispensabilityReport(
        grain=k,
        dispensable=dispensable,
        witness=witness,
        special=special,
        boundary_affected=dispensable and _near_edge(config, witness),
        special_without_weight_clause=special and not dispensable,
    )


def dispensable_mask(config: Configuration, h: WeightSpec,
                     graph: ContactGraph | None = None) -> np.ndarray:
    graph = graph or build_contact_graph(config)
    key = h.order_key(config.radii)
    return np.array([_witness(k, key, graph) is not None for k in range(len(config))], dtype=bool)


def remove_dispensable(config: Configuration, h: WeightSpec,
                       graph: ContactGraph | None = None) -> Configuration:
    """One pass: drop every grain dispensable in the original configuration.

    The result's ``source_ids`` map its grains back to ``config`` ids.
    """
    mask = dispensable_mask(config, h, graph)
    return config.subset(np.nonzero(~mask)[0].tolist())
