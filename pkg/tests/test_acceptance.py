"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Suites run once at their full default parameters and are shared between
criteria. Expect roughly ten minutes on one core.
"""

import csv
import io
import time

import pytest

from conftest import pairwise_overlaps
from hardcore_thin.graph import build_contact_graph, connected_components
from hardcore_thin.harness.config import parse_config
from hardcore_thin.harness.runner import run
from hardcore_thin.model import RadiusLaw, Window, WeightSpec, sample_poisson
from hardcore_thin.mwis import brute_force, solve_exact
from hardcore_thin.thinning import component_max, local_improve, matern_one, sample_voronoi, \
    thin_minus

_cache = {}


@pytest.fixture(scope="module")
def suite(tmp_path_factory):
    def get(name, **overrides):
        key = (name, tuple(sorted(overrides.items())))
        if key not in _cache:
            cfg = parse_config("", {k: str(v) for k, v in overrides.items()}, experiment=name)
            out = tmp_path_factory.mktemp(name)
            start = time.perf_counter()
            summary = run(cfg, out, workers=1)
            _cache[key] = dict(cfg=cfg, out=out, summary=summary,
                               seconds=time.perf_counter() - start)
        return _cache[key]
    return get


def report(capsys, number, title, ok, detail):
    with capsys.disabled():
        print(f"\n[acceptance] criterion {number:>2} {title}: {'PASS' if ok else 'FAIL'} ({detail})")
    assert ok, detail


def test_criterion_01_mwis_matches_brute_force(capsys):
    window = Window.torus(20.0, 2)
    law = RadiusLaw.uniform(0.3, 0.5)
    h = WeightSpec.volume()
    start = time.perf_counter()
    compared = mismatches = largest = 0
    for s in range(500):
        c = sample_poisson(0.3, law, window, s)
        g = build_contact_graph(c)
        for comp in connected_components(g):
            largest = max(largest, len(comp))
            if len(comp) <= 15:
                compared += 1
                mismatches += (solve_exact(comp, c, h, graph=g).chosen
                               != brute_force(comp, c, h, graph=g).chosen)
    secs = time.perf_counter() - start
    report(capsys, 1, "MWIS oracle equivalence", mismatches == 0 and secs < 120,
           f"500 configs, {compared} components up to size {largest}, "
           f"{mismatches} mismatches, {secs:.0f}s")


def test_criterion_02_hard_core_everywhere(capsys, suite):
    names = ("sandwich", "matern-check", "uniqueness", "dispensable", "shield")
    flags = {n: suite(n)["summary"]["assertions"]["hard_core"] for n in names}
    # direct scan on fresh realizations for every hard-core producer
    window = Window.torus(15.0, 2)
    h = WeightSpec.volume()
    direct = 0
    for s in range(20):
        c = sample_poisson(0.8, RadiusLaw.uniform(0.3, 0.5), window, s)
        tess = sample_voronoi(window, 0.1, 1000 + s)
        for t in (matern_one(c), component_max(c, h), thin_minus(c, tess, h),
                  local_improve(c, matern_one(c), h, 3.0, 2)):
            assert t.hard_core
            direct += len(pairwise_overlaps(c, t.kept))
    report(capsys, 2, "hard-core invariant", all(flags.values()) and direct == 0,
           f"suite flags {flags}, direct scan overlaps {direct}")


def _metrics(entry):
    return entry["summary"]["metrics"]


def test_criterion_03_sandwich(capsys, suite):
    s = suite("sandwich")
    a = s["summary"]["assertions"]
    m = _metrics(s)
    gaps = ", ".join(f"{m[f'gap_mean[s={x!r}]']:.4f}+-{m[f'gap_se[s={x!r}]']:.4f}"
                     for x in s["cfg"].seed_intensities)
    ok = a["sandwich_per_realization"] and a["gap_strictly_decreasing"] \
        and s["summary"]["row_errors"] == 0
    report(capsys, 3, "sandwich", ok,
           f"{s['cfg'].replicates} replicates, mean gaps {gaps}, {s['seconds']:.0f}s")


def test_criterion_04_cellwise_bound(capsys, suite):
    s = suite("sandwich")
    with open(s["out"] / "sandwich.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    bad = sum(int(r["cell_violations"]) for r in rows)
    report(capsys, 4, "cellwise bound", bad == 0 and s["summary"]["assertions"]["cellwise_bound"],
           f"{len(rows)} realizations, {bad} violating cells")


def test_criterion_05_matern(capsys, suite):
    s = suite("matern-check")
    m = _metrics(s)
    report(capsys, 5, "Matern I intensity", s["summary"]["assertions"]["matches_theory_4se"],
           f"mean {m['retained_mean']:.5f} vs {m['theory']:.5f}, z = {m['z_score']:.2f}")


def test_criterion_06_uniqueness(capsys, suite):
    s = suite("uniqueness")
    m = _metrics(s)
    ok = s["summary"]["assertions"]["converges_to_component_max"] and m["replicates_ok"] >= 300
    report(capsys, 6, "local_improve uniqueness", ok,
           f"{m['replicates_ok']} configs x 3 starts, {m['failures']} failures, {s['seconds']:.0f}s")


def test_criterion_07_dispensable(capsys, suite):
    s = suite("dispensable")
    u = suite("uniqueness")
    a = s["summary"]["assertions"]
    m = _metrics(s)
    # the two suites draw the same configurations
    seeds = [[r["seed"] for r in csv.DictReader(open(x["out"] / f"{x['cfg'].experiment}.csv"))]
             for x in (s, u)]
    ok = a["same_maximum_after_removal"] and a["no_dispensable_in_maximum"] and seeds[0] == seeds[1]
    report(capsys, 7, "dispensable removal", ok,
           f"{m['replicates_ok']} configs, {m['unequal']} unequal, "
           f"{m['mean_dispensable']:.2f} dispensable grains per config")


def test_criterion_08_theta_coupling(capsys, suite):
    s = suite("theta-grid", p_values="0.2,0.4,0.6,0.8")
    m = _metrics(s)
    thetas = ", ".join(f"{m[f'theta[p={p!r},q=0.5]']:.3f}" for p in s["cfg"].p_values)
    report(capsys, 8, "theta monotone coupling", s["summary"]["assertions"]["monotone_in_p"],
           f"{s['cfg'].replicates} replicates, {m['violations_p']} violations, theta {thetas}, "
           f"parse {m['parse']}")


def test_criterion_09_huge_and_good_trends(capsys, suite):
    s = suite("huge-scan")
    a = s["summary"]["assertions"]
    m = _metrics(s)
    av = s["cfg"].a_values
    huge = ", ".join(f"{m[f'huge_fraction_mean[a={x}]']:.3f}" for x in av)
    good = ", ".join(f"{m[f'good_fraction_mean[a={x}]']:.3f}" for x in av)
    report(capsys, 9, "huge/good trends",
           a["huge_fraction_nondecreasing"] and a["good_fraction_nondecreasing"],
           f"a = {av}: huge {huge}; good {good}")


def test_criterion_10_shield(capsys, suite):
    s = suite("shield")
    a = s["summary"]["assertions"]
    m = _metrics(s)
    ok = a["no_shield_violations"] and a["all_converged"] and s["summary"]["row_errors"] == 0
    report(capsys, 10, "shield", ok,
           f"{s['cfg'].replicates} configs, {m['enclosed_total']} enclosed grains, "
           f"{m['violations_total']} violations, {m['disagreement_total']} disagreeing grains, "
           f"{s['seconds']:.0f}s")


DETERMINISM = ("sandwich", "matern-check", "uniqueness", "dispensable", "theta-grid",
               "huge-scan", "shield", "isoperimetric")


def test_criterion_11_determinism(capsys, suite, tmp_path):
    """Rerun a prefix of every suite with two workers; its CSV must equal the
    first rows of the full single-worker run byte for byte."""
    same = {}
    for name in DETERMINISM:
        full = suite(name, p_values="0.2,0.4,0.6,0.8") if name == "theta-grid" else suite(name)
        cfg = full["cfg"]
        k = min(cfg.replicates, 8)
        short = parse_config("", {"replicates": str(k)} | (
            {"p_values": "0.2,0.4,0.6,0.8"} if name == "theta-grid" else {}), experiment=name)
        run(short, tmp_path / name, workers=2)
        got = (tmp_path / name / f"{name}.csv").read_text()
        ref = (full["out"] / f"{name}.csv").read_text()
        rows = list(csv.reader(io.StringIO(ref)))
        prefix = [rows[0]] + [r for r in rows[1:] if int(r[1]) < k]
        buf = io.StringIO()
        csv.writer(buf, lineterminator="\n").writerows(prefix)
        same[name] = got == buf.getvalue()
    report(capsys, 11, "determinism", all(same.values()), f"byte-identical: {same}")
