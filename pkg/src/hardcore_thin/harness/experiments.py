"""Named experiment suites.

Every suite maps one replicate index to a list of result rows (one per
parameter point) and summarizes all rows into metrics and named assertions.
Rows depend only on the configuration and the replicate index.
"""

from __future__ import annotations

import math
import zlib

import numpy as np

from ..dispensable import dispensable_mask, remove_dispensable
from ..estimators import isoperimetric_coefficient
from ..graph import build_contact_graph, connected_components
from ..hugegrains import good_site_grid, huge_exponent, huge_fraction, shield_check
from ..model import (Configuration, RadiusLaw, Window, WeightSpec, sample_poisson,
                     unit_ball_volume)
from ..mwis import ComponentTooLarge
from ..percolation import crossing_grid
from ..thinning import (Thinning, component_max, local_improve, matern_one, sample_voronoi,
                        window_inequality_check)
from .config import ExperimentConfig


def derive_seed(master: int, tag: str, *index: int) -> int:
    """Deterministic 64-bit seed for (master seed, stream tag, indices)."""
    ss = np.random.SeedSequence([int(master), zlib.crc32(tag.encode())] + [int(i) for i in index])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def make_window(cfg: ExperimentConfig) -> Window:
    if cfg.window == "torus":
        return Window.torus(cfg.window_size, cfg.dim)
    return Window.free_ball(cfg.window_size, cfg.dim)


def overlap_violations(config: Configuration, ids) -> int:
    """Pairs of ``ids`` with overlapping interiors, by a direct all-pairs scan."""
    ids = np.asarray(sorted(ids), dtype=int)
    if ids.size < 2:
        return 0
    c = config.centers[ids]
    r = config.radii[ids]
    delta = config.window.displacement(c[:, None, :] - c[None, :, :])
    dist = np.sqrt(np.einsum("ijk,ijk->ij", delta, delta))
    bad = dist < r[:, None] + r[None, :]
    np.fill_diagonal(bad, False)
    return int(bad.sum() // 2)


def mean_se(values) -> tuple:
    v = np.asarray([x for x in values if x == x], dtype=float)
    if v.size == 0:
        return float("nan"), float("nan")
    se = float(v.std(ddof=1) / math.sqrt(v.size)) if v.size > 1 else 0.0
    return float(v.mean()), se


def _group(rows, key):
    out = {}
    for row in rows:
        if row.get("status", "ok") == "ok":
            out.setdefault(row[key], []).append(row)
    return out


def trend(means, ses, decreasing: bool, strict: bool) -> bool:
    """Monotone trend of means judged at 2 combined standard errors.

    ``strict``: every step must move in the stated direction by more than
    2 SE. Otherwise a step may go the wrong way by at most 2 SE.
    """
    for j in range(len(means) - 1):
        step = means[j + 1] - means[j]
        if decreasing:
            step = -step
        tol = 2 * math.hypot(ses[j], ses[j + 1])
        if strict and not step > tol:
            return False
        if not strict and step < -tol:
            return False
    return True


def random_maximal_independent(graph, n: int, seed: int) -> Thinning:
    kept = set()
    for i in np.random.default_rng(seed).permutation(n).tolist():
        if not graph.neighbor_sets[i] & kept:
            kept.add(i)
    return Thinning(tuple(kept), "random_maximal", True)


def _small_config(cfg: ExperimentConfig, i: int):
    """Configuration with every component at most ``max_component``; redrawn otherwise."""
    window = make_window(cfg)
    for attempt in range(1000):
        seed = derive_seed(cfg.master_seed, "config", i, attempt)
        config = sample_poisson(cfg.intensity, cfg.radius_law, window, seed)
        graph = build_contact_graph(config)
        comps = connected_components(graph)
        largest = max((len(c) for c in comps), default=0)
        if largest <= cfg.max_component:
            return config, graph, largest, seed, attempt
    raise RuntimeError("no configuration with small components in 1000 draws")


# ---------------------------------------------------------------- sandwich

def sandwich_rows(cfg, i):
    window = make_window(cfg)
    seed = derive_seed(cfg.master_seed, "config", i)
    config = sample_poisson(cfg.intensity, cfg.radius_law, window, seed)
    graph = build_contact_graph(config)
    rows = []
    for j, s in enumerate(cfg.seed_intensities):
        tess = sample_voronoi(window, s, derive_seed(cfg.master_seed, "tessellation", i, j))
        row = dict(seed_intensity=s, n_grains=len(config), n_cells=len(tess), seed=seed)
        try:
            report = window_inequality_check(config, None, tess, cfg.weight, cap=cfg.cap,
                                             graph=graph)
        except ComponentTooLarge as exc:
            row.update(status=f"ComponentTooLarge({exc.size})")
            rows.append(row)
            continue
        lo, hi = report["minus_weight"], report["plus_weight"]
        vol = window.volume
        row.update(status="ok", minus_intensity=lo / vol, plus_intensity=hi / vol,
                   gap=(hi - lo) / vol, sandwich_ok=int(lo <= hi),
                   cell_violations=len(report["violations"]),
                   min_slack=min(report["slack"]),
                   overlap_violations=overlap_violations(config, report["minus"].kept))
        rows.append(row)
    return rows


def sandwich_summary(cfg, rows):
    groups = _group(rows, "seed_intensity")
    means, ses, metrics = [], [], {}
    for s in cfg.seed_intensities:
        m, se = mean_se(r["gap"] for r in groups.get(s, []))
        means.append(m)
        ses.append(se)
        metrics[f"gap_mean[s={s!r}]"] = m
        metrics[f"gap_se[s={s!r}]"] = se
    ok = [r for r in rows if r.get("status") == "ok"]
    asserts = {
        "sandwich_per_realization": all(r["sandwich_ok"] for r in ok),
        "cellwise_bound": all(r["cell_violations"] == 0 for r in ok),
        "hard_core": all(r["overlap_violations"] == 0 for r in ok),
        "gap_strictly_decreasing": trend(means, ses, decreasing=True, strict=True),
    }
    return metrics, asserts


# ------------------------------------------------------------ matern-check

def _law_moments(law: RadiusLaw, d: int):
    if law.kind == "fixed":
        return np.array([law.lo]), np.array([1.0])
    nodes, weights = np.polynomial.legendre.leggauss(64)
    r = law.lo + (law.hi - law.lo) * (nodes + 1) / 2
    return r, weights / 2


def matern_theory(intensity: float, law: RadiusLaw, d: int) -> float:
    """Retained intensity of Matern I: a grain of radius r survives when no other
    center falls within distance r + R, a Poisson void probability."""
    r, w = _law_moments(law, d)
    kappa = unit_ball_volume(d)
    reach = np.array([np.sum(w * (ri + r) ** d) for ri in r])
    return float(intensity * np.sum(w * np.exp(-intensity * kappa * reach)))


def matern_rows(cfg, i):
    window = make_window(cfg)
    seed = derive_seed(cfg.master_seed, "config", i)
    config = sample_poisson(cfg.intensity, cfg.radius_law, window, seed)
    t = matern_one(config)
    return [dict(status="ok", n_grains=len(config), retained=len(t.kept),
                 retained_intensity=len(t.kept) / window.volume,
                 overlap_violations=overlap_violations(config, t.kept), seed=seed)]


def matern_summary(cfg, rows):
    m, se = mean_se(r["retained_intensity"] for r in rows if r["status"] == "ok")
    theory = matern_theory(cfg.intensity, cfg.radius_law, cfg.dim)
    return ({"retained_mean": m, "retained_se": se, "theory": theory,
             "z_score": (m - theory) / se if se > 0 else float("nan")},
            {"matches_theory_4se": abs(m - theory) <= 4 * se,
             "hard_core": all(r["overlap_violations"] == 0 for r in rows)})


# -------------------------------------------------------------- uniqueness

def uniqueness_rows(cfg, i):
    config, graph, largest, seed, attempt = _small_config(cfg, i)
    h = cfg.weight
    target = component_max(config, h, cfg.cap, graph)
    starts = {
        "empty": Thinning((), "empty", True),
        "matern": matern_one(config, graph),
        "random": random_maximal_independent(graph, len(config),
                                             derive_seed(cfg.master_seed, "start", i)),
    }
    row = dict(status="ok", n_grains=len(config), max_component=largest, redraws=attempt,
               seed=seed)
    bad = overlap_violations(config, target.kept)
    for name, t0 in starts.items():
        res = local_improve(config, t0, h, cfg.m, cfg.s_max, graph=graph)
        row[f"match_{name}"] = int(res.kept == target.kept)
        row[f"rounds_{name}"] = res.info["rounds"]
        bad += overlap_violations(config, res.kept) + overlap_violations(config, t0.kept)
    row["overlap_violations"] = bad
    return [row]


def uniqueness_summary(cfg, rows):
    ok = [r for r in rows if r["status"] == "ok"]
    fails = sum(1 for r in ok for k in ("empty", "matern", "random") if not r[f"match_{k}"])
    return ({"replicates_ok": len(ok), "failures": fails},
            {"converges_to_component_max": fails == 0 and len(ok) == len(rows),
             "hard_core": all(r["overlap_violations"] == 0 for r in ok)})


# ------------------------------------------------------------- dispensable

def dispensable_rows(cfg, i):
    config, graph, largest, seed, attempt = _small_config(cfg, i)
    h = cfg.weight
    full = component_max(config, h, cfg.cap, graph)
    mask = dispensable_mask(config, h, graph)
    reduced = remove_dispensable(config, h, graph)
    sub = component_max(reduced, h, cfg.cap)
    mapped = tuple(sorted(reduced.source_ids[k] for k in sub.kept))
    return [dict(status="ok", n_grains=len(config), max_component=largest,
                 n_dispensable=int(mask.sum()), equal=int(mapped == full.kept),
                 dispensable_kept=int(mask[list(full.kept)].sum()) if full.kept else 0,
                 overlap_violations=overlap_violations(config, full.kept), seed=seed)]


def dispensable_summary(cfg, rows):
    ok = [r for r in rows if r["status"] == "ok"]
    return ({"replicates_ok": len(ok),
             "mean_dispensable": mean_se(r["n_dispensable"] for r in ok)[0],
             "unequal": sum(1 - r["equal"] for r in ok)},
            {"same_maximum_after_removal": all(r["equal"] for r in ok),
             "no_dispensable_in_maximum": all(r["dispensable_kept"] == 0 for r in ok),
             "hard_core": all(r["overlap_violations"] == 0 for r in ok)})


# -------------------------------------------------------------- theta-grid

def theta_rows(cfg, i):
    seed = derive_seed(cfg.master_seed, "config", i)
    grid = crossing_grid(cfg.window_size, cfg.intensity, cfg.radius_law, cfg.p_values,
                         cfg.q_values, seed, cfg.dim, cfg.parse)
    rows = []
    for a, p in enumerate(cfg.p_values):
        for b, q in enumerate(cfg.q_values):
            rows.append(dict(status="ok", p=p, q=q, crossing=int(grid[a, b]), seed=seed))
    return rows


def theta_summary(cfg, rows):
    by_rep = {}
    for r in rows:
        by_rep.setdefault(r["replicate"], {})[(r["p"], r["q"])] = r["crossing"]
    viol_p = viol_q = 0
    for grid in by_rep.values():
        for q in cfg.q_values:
            seq = [grid[(p, q)] for p in sorted(cfg.p_values)]
            viol_p += int(any(b < a for a, b in zip(seq, seq[1:])))
        for p in cfg.p_values:
            seq = [grid[(p, q)] for q in sorted(cfg.q_values)]
            viol_q += int(any(b < a for a, b in zip(seq, seq[1:])))
    metrics = {}
    n = len(by_rep)
    for p in cfg.p_values:
        for q in cfg.q_values:
            est = sum(g[(p, q)] for g in by_rep.values()) / n
            metrics[f"theta[p={p!r},q={q!r}]"] = est
            metrics[f"theta_halfwidth[p={p!r},q={q!r}]"] = 1.96 * math.sqrt(est * (1 - est) / n)
    metrics["violations_p"] = viol_p
    metrics["violations_q"] = viol_q
    metrics["parse"] = cfg.parse
    return metrics, {"monotone_in_p": viol_p == 0, "monotone_in_q": viol_q == 0}


# --------------------------------------------------------------- huge-scan

def huge_rows(cfg, i):
    window = make_window(cfg)
    seed = derive_seed(cfg.master_seed, "config", i)
    config = sample_poisson(cfg.intensity, cfg.radius_law, window, seed)
    graph = build_contact_graph(config)
    rows = []
    for a in cfg.a_values:
        huge, total = huge_fraction(config, a, graph=graph)
        grid = good_site_grid(config, a, graph)
        rows.append(dict(status="ok", a=a, n_grains=len(config), cube_grains=total,
                         huge_grains=huge, huge_fraction=huge / total if total else float("nan"),
                         n_sites=len(grid.sites), good_sites=int(grid.good.sum()),
                         good_fraction=grid.good_fraction, seed=seed))
    return rows


def huge_summary(cfg, rows):
    groups = _group(rows, "a")
    metrics, asserts = {}, {}
    for col in ("huge_fraction", "good_fraction"):
        means, ses = [], []
        for a in cfg.a_values:
            m, se = mean_se(r[col] for r in groups.get(a, []))
            means.append(m)
            ses.append(se)
            metrics[f"{col}_mean[a={a}]"] = m
            metrics[f"{col}_se[a={a}]"] = se
        asserts[f"{col}_nondecreasing"] = trend(means, ses, decreasing=False, strict=False)
    return metrics, asserts


# ------------------------------------------------------------------ shield

def shield_rows(cfg, i):
    window = make_window(cfg)
    seed = derive_seed(cfg.master_seed, "config", i)
    config = sample_poisson(cfg.intensity, cfg.radius_law, window, seed)
    graph = build_contact_graph(config)
    rows = []
    for a in cfg.a_values:
        h = WeightSpec.exp_radius(huge_exponent(a, cfg.dim))
        m = cfg.m_factor * a
        grid = good_site_grid(config, a, graph)
        t1 = local_improve(config, Thinning((), "empty", True), h, m, cfg.s_max, graph=graph)
        t2 = local_improve(config, matern_one(config, graph), h, m, cfg.s_max, graph=graph)
        rep = shield_check(config, grid, t1, t2, a, graph)
        rows.append(dict(
            status="ok", a=a, n_grains=len(config), good_fraction=grid.good_fraction,
            enclosed=len(rep.enclosed), in_good_cube=rep.in_good_cube,
            ring_enclosed=rep.ring_enclosed, disagreement=len(set(t1.kept) ^ set(t2.kept)),
            violations=len(rep.violations),
            violating_components=";".join(" ".join(map(str, c)) for c in rep.components),
            converged=int(t1.info["converged"] and t2.info["converged"]),
            overlap_violations=overlap_violations(config, t1.kept)
            + overlap_violations(config, t2.kept),
            seed=seed))
    return rows


def shield_summary(cfg, rows):
    ok = [r for r in rows if r["status"] == "ok"]
    metrics = {"enclosed_total": sum(r["enclosed"] for r in ok),
               "violations_total": sum(r["violations"] for r in ok),
               "disagreement_total": sum(r["disagreement"] for r in ok)}
    return metrics, {"no_shield_violations": metrics["violations_total"] == 0,
                     "all_converged": all(r["converged"] for r in ok),
                     "hard_core": all(r["overlap_violations"] == 0 for r in ok)}


# ----------------------------------------------------------- isoperimetric

def iso_rows(cfg, i):
    window = make_window(cfg)
    rows = []
    for j, s in enumerate(cfg.seed_intensities):
        tseed = derive_seed(cfg.master_seed, "tessellation", i, j)
        tess = sample_voronoi(window, s, tseed)
        est = isoperimetric_coefficient(tess, cfg.m, window, cfg.samples,
                                        derive_seed(cfg.master_seed, "points", i, j))
        rows.append(dict(status="ok", seed_intensity=s, n_cells=len(tess),
                         fraction=est.fraction, upper_bound=est.upper_bound, seed=tseed))
    return rows


def iso_summary(cfg, rows):
    groups = _group(rows, "seed_intensity")
    means, ses, metrics = [], [], {}
    for s in cfg.seed_intensities:
        m, se = mean_se(r["fraction"] for r in groups.get(s, []))
        means.append(m)
        ses.append(se)
        metrics[f"fraction_mean[s={s!r}]"] = m
        metrics[f"fraction_se[s={s!r}]"] = se
        metrics[f"upper_bound_mean[s={s!r}]"] = mean_se(r["upper_bound"] for r in groups.get(s, []))[0]
    return metrics, {"strictly_decreasing": trend(means, ses, decreasing=True, strict=True)}


SUITES = {
    "sandwich": (sandwich_rows, sandwich_summary,
                 ["seed_intensity", "n_grains", "n_cells", "minus_intensity", "plus_intensity",
                  "gap", "sandwich_ok", "cell_violations", "min_slack", "overlap_violations"]),
    "matern-check": (matern_rows, matern_summary,
                     ["n_grains", "retained", "retained_intensity", "overlap_violations"]),
    "uniqueness": (uniqueness_rows, uniqueness_summary,
                   ["n_grains", "max_component", "redraws", "match_empty", "match_matern",
                    "match_random", "rounds_empty", "rounds_matern", "rounds_random",
                    "overlap_violations"]),
    "dispensable": (dispensable_rows, dispensable_summary,
                    ["n_grains", "max_component", "n_dispensable", "equal", "dispensable_kept",
                     "overlap_violations"]),
    "theta-grid": (theta_rows, theta_summary, ["p", "q", "crossing"]),
    "huge-scan": (huge_rows, huge_summary,
                  ["a", "n_grains", "cube_grains", "huge_grains", "huge_fraction", "n_sites",
                   "good_sites", "good_fraction"]),
    "shield": (shield_rows, shield_summary,
               ["a", "n_grains", "good_fraction", "enclosed", "in_good_cube", "ring_enclosed",
                "disagreement", "violations", "violating_components", "converged",
                "overlap_violations"]),
    "isoperimetric": (iso_rows, iso_summary,
                      ["seed_intensity", "n_cells", "fraction", "upper_bound"]),
}
