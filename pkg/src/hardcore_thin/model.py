"""Grains, windows, radius laws, weights and Poisson Boolean model sampling."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np


def unit_ball_volume(d: int) -> float:
    """Lebesgue volume of the unit ball in dimension ``d``."""
    return math.pi ** (d / 2) / math.gamma(d / 2 + 1)


@dataclass(frozen=True)
class Grain:
    id: int
    center: tuple
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError(f"grain {self.id}: radius must be positive, got {self.radius}")


@dataclass(frozen=True)
class Window:
    """Observation window: a flat torus ``[0, L)^d`` or a free ball ``B_n(o)``.

    Use :meth:`torus` / :meth:`free_ball` rather than the raw constructor.
    """

    kind: str
    size: float
    dim: int

    def __post_init__(self):
        if self.kind not in ("torus", "ball"):
            raise ValueError(f"unknown window kind {self.kind!r}")
        if self.dim not in (1, 2, 3):
            raise ValueError(f"dimension must be 1, 2 or 3, got {self.dim}")
        if not self.size > 0:
            raise ValueError("window size must be positive")
        if self.kind == "ball" and self.size < 3:
            raise ValueError(f"free ball radius must be >= 3, got {self.size}")

    @classmethod
    def torus(cls, side: float, dim: int = 2) -> "Window":
        return cls("torus", float(side), int(dim))

    @classmethod
    def free_ball(cls, radius: float, dim: int = 2) -> "Window":
        return cls("ball", float(radius), int(dim))

    @property
    def is_torus(self) -> bool:
        return self.kind == "torus"

    @property
    def volume(self) -> float:
        if self.is_torus:
            return self.size ** self.dim
        return unit_ball_volume(self.dim) * self.size ** self.dim

    def displacement(self, delta):
        """Reduce displacement vectors to the window metric (minimum image on the torus)."""
        delta = np.asarray(delta, dtype=float)
        if self.is_torus:
            L = self.size
            delta = delta - L * np.round(delta / L)
        return delta

    def distance(self, x, y):
        return np.linalg.norm(self.displacement(np.asarray(y, float) - np.asarray(x, float)), axis=-1)

    def contains(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if self.is_torus:
            return np.all((pts >= 0) & (pts < self.size), axis=1)
        return np.linalg.norm(pts, axis=1) <= self.size

    def sample_uniform(self, rng: np.random.Generator, n: int) -> np.ndarray:
        d = self.dim
        if self.is_torus:
            return rng.uniform(0.0, self.size, size=(n, d))
        direction = rng.standard_normal((n, d))
        norms = np.linalg.norm(direction, axis=1)
        norms[norms == 0] = 1.0
        radial = self.size * rng.random(n) ** (1.0 / d)
        return direction / norms[:, None] * radial[:, None]

    def check_radius(self, max_radius: float) -> None:
        if self.is_torus and not self.size > 4 * max_radius:
            raise ValueError(
                f"torus side {self.size} must exceed 4 x max radius ({4 * max_radius})"
            )


@dataclass(frozen=True)
class RadiusLaw:
    """Radius distribution: ``fixed`` (``lo`` is the radius) or ``uniform`` on ``(lo, hi]``."""

    kind: str
    lo: float
    hi: float

    @classmethod
    def fixed(cls, r: float) -> "RadiusLaw":
        if not r > 0:
            raise ValueError("fixed radius must be positive")
        return cls("fixed", float(r), float(r))

    @classmethod
    def uniform(cls, lo: float, hi: float) -> "RadiusLaw":
        if lo < 0 or not hi > lo:
            raise ValueError(f"uniform radius law needs 0 <= lo < hi, got ({lo}, {hi})")
        return cls("uniform", float(lo), float(hi))

    @property
    def max_radius(self) -> float:
        return self.hi

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.kind == "fixed":
            return np.full(n, self.lo)
        # 1 - U lies in (0, 1], so radii never hit 0 when lo == 0
        return self.lo + (self.hi - self.lo) * (1.0 - rng.random(n))

    def __str__(self) -> str:
        if self.kind == "fixed":
            return f"fixed:{self.lo!r}"
        return f"uniform:{self.lo!r},{self.hi!r}"


@dataclass(frozen=True)
class WeightSpec:
    """Grain weight ``h``: ``unit`` (h = 1), ``volume`` or ``exp`` (h_a = exp(a r))."""

    kind: str
    a: float = 0.0

    def __post_init__(self):
        if self.kind not in ("unit", "volume", "exp"):
            raise ValueError(f"unknown weight kind {self.kind!r}")
        if self.kind == "exp" and self.a < 1:
            raise ValueError(f"exponential-radius weight needs a >= 1, got {self.a}")

    @classmethod
    def unit(cls) -> "WeightSpec":
        return cls("unit")

    @classmethod
    def volume(cls) -> "WeightSpec":
        return cls("volume")

    @classmethod
    def exp_radius(cls, a: float) -> "WeightSpec":
        return cls("exp", float(a))

    def log_values(self, radii, d: int) -> np.ndarray:
        """Natural log of the weights; safe for any ``a``."""
        radii = np.asarray(radii, dtype=float)
        if self.kind == "unit":
            return np.zeros_like(radii)
        if self.kind == "volume":
            return math.log(unit_ball_volume(d)) + d * np.log(radii)
        return self.a * radii

    def values(self, radii, d: int) -> np.ndarray:
        radii = np.asarray(radii, dtype=float)
        if self.kind == "unit":
            return np.ones_like(radii)
        if self.kind == "volume":
            return unit_ball_volume(d) * radii ** d
        with np.errstate(over="ignore"):
            return np.exp(self.a * radii)

    def relative_values(self, radii, d: int) -> np.ndarray:
        """Weights up to a common positive factor, scaled so the largest is O(1).

        Only ``exp`` weights are rescaled; unit and volume weights are returned
        unchanged so hand-built ties stay exact.
        """
        radii = np.asarray(radii, dtype=float)
        if self.kind == "exp" and radii.size:
            return np.exp(self.a * (radii - radii.max()))
        return self.values(radii, d)

    def order_key(self, radii) -> np.ndarray:
        """Keys with h(r1) < h(r2) iff key(r1) < key(r2), free of rounding in h."""
        radii = np.asarray(radii, dtype=float)
        return np.zeros_like(radii) if self.kind == "unit" else radii

    def __str__(self) -> str:
        return f"exp:{self.a!r}" if self.kind == "exp" else self.kind


def weight(g: Grain, h: WeightSpec, d: int) -> float:
    return float(h.values(np.array([g.radius]), d)[0])


@dataclass(frozen=True, eq=False)
class Configuration:
    """A finite realization of balls in a window.

    Grain ``i`` is row ``i`` of ``centers``/``radii``. ``source_ids`` maps ids
    back to a parent configuration when this one was derived by filtering.
    """

    window: Window
    centers: np.ndarray
    radii: np.ndarray
    source_ids: tuple | None = field(default=None)

    def __post_init__(self):
        centers = np.array(self.centers, dtype=float).reshape(-1, self.window.dim)
        radii = np.array(self.radii, dtype=float).reshape(-1)
        if centers.shape[0] != radii.shape[0]:
            raise ValueError("centers and radii disagree in length")
        if np.any(radii <= 0):
            raise ValueError("radii must be positive")
        if centers.shape[0] and not np.all(self.window.contains(centers)):
            raise ValueError("grain centers must lie inside the window")
        centers.setflags(write=False)
        radii.setflags(write=False)
        object.__setattr__(self, "centers", centers)
        object.__setattr__(self, "radii", radii)

    def __len__(self) -> int:
        return self.radii.shape[0]

    @property
    def dim(self) -> int:
        return self.window.dim

    @cached_property
    def grains(self) -> tuple:
        return tuple(
            Grain(i, tuple(float(c) for c in self.centers[i]), float(self.radii[i]))
            for i in range(len(self))
        )

    def subset(self, ids) -> "Configuration":
        ids = np.asarray(sorted(ids), dtype=int)
        parent = np.arange(len(self)) if self.source_ids is None else np.asarray(self.source_ids)
        return Configuration(
            self.window,
            self.centers[ids],
            self.radii[ids],
            tuple(int(i) for i in parent[ids]) if ids.size else (),
        )

    def same_as(self, other: "Configuration") -> bool:
        return (
            self.window == other.window
            and np.array_equal(self.centers, other.centers)
            and np.array_equal(self.radii, other.radii)
        )

    @classmethod
    def from_grains(cls, window: Window, grains) -> "Configuration":
        grains = list(grains)
        for i, g in enumerate(grains):
            if g.id != i:
                raise ValueError("grain ids must be 0..count-1 in list order")
        centers = np.array([g.center for g in grains], dtype=float).reshape(-1, window.dim)
        radii = np.array([g.radius for g in grains], dtype=float)
        return cls(window, centers, radii)


def sample_poisson(intensity: float, law: RadiusLaw, window: Window, seed: int) -> Configuration:
    """Poisson Boolean model restricted to ``window``; deterministic in ``seed``."""
    if not intensity > 0:
        raise ValueError("intensity must be positive")
    window.check_radius(law.max_radius)
    rng = np.random.default_rng(seed)
    n = int(rng.poisson(intensity * window.volume))
    centers = window.sample_uniform(rng, n)
    radii = law.sample(rng, n)
    return Configuration(window, centers, radii)


def interiors_overlap(g1: Grain, g2: Grain, window: Window) -> bool:
    """Strict overlap test; tangent balls do not overlap."""
    dist = float(window.distance(g1.center, g2.center))
    return dist < g1.radius + g2.radius
