"""Run an experiment over replicates and persist CSV rows plus a JSON summary."""

from __future__ import annotations

import csv
import json
import math
import os
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .config import ExperimentConfig, serialize_config
from .experiments import SUITES

SCHEMA_VERSION = 1
THREADS_ENV = "HARDCORE_THIN_THREADS"
LEAD_COLUMNS = ["experiment", "replicate"]
TAIL_COLUMNS = ["status", "seed"]


def worker_count() -> int:
    cap = os.environ.get(THREADS_ENV)
    n = os.cpu_count() or 1
    if cap:
        try:
            n = min(n, int(cap)) if int(cap) > 0 else n
        except ValueError:
            raise ValueError(f"{THREADS_ENV} must be an integer, got {cap!r}") from None
    return max(1, n)


def _replicate(args):
    cfg, i = args
    rows_fn = SUITES[cfg.experiment][0]
    start = time.perf_counter()
    try:
        rows = rows_fn(cfg, i)
    except Exception as exc:  # recorded per replicate; the run goes on
        rows = [dict(status=f"error:{type(exc).__name__}: {exc}".replace("\n", " "))]
        traceback.print_exc()
    elapsed = time.perf_counter() - start
    for row in rows:
        row["experiment"] = cfg.experiment
        row["replicate"] = i
        row["wall_time"] = elapsed / len(rows)
    return rows


def run_rows(cfg: ExperimentConfig, workers: int | None = None) -> list:
    workers = worker_count() if workers is None else max(1, int(workers))
    tasks = [(cfg, i) for i in range(cfg.replicates)]
    if workers == 1:
        chunks = map(_replicate, tasks)
        return [row for rows in chunks for row in rows]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        # map preserves replicate order, so output never depends on scheduling
        return [row for rows in pool.map(_replicate, tasks, chunksize=4) for row in rows]


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, float):
        return "nan" if math.isnan(value) else repr(value)
    return str(value)


def columns_for(experiment: str) -> list:
    return LEAD_COLUMNS + SUITES[experiment][2] + TAIL_COLUMNS


def write_csv(path: Path, columns: list, rows: list) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_cell(row.get(c)) for c in columns])


def _jsonable(value):
    if isinstance(value, float) and not math.isfinite(value):
        return str(value)
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    return value


def summarize(cfg: ExperimentConfig, rows: list) -> dict:
    metrics, asserts = SUITES[cfg.experiment][1](cfg, rows)
    errors = [r["status"] for r in rows if r.get("status") != "ok"]
    return {
        "schema_version": SCHEMA_VERSION,
        "experiment": cfg.experiment,
        "config": serialize_config(cfg),
        "replicates": cfg.replicates,
        "rows": len(rows),
        "row_errors": len(errors),
        "metrics": _jsonable(metrics),
        "assertions": {k: bool(v) for k, v in asserts.items()},
        "failed": sorted(k for k, v in asserts.items() if not v),
        "passed": all(asserts.values()),
    }


def run(cfg: ExperimentConfig, out_dir, workers: int | None = None) -> dict:
    """Write ``<exp>.csv`` (metrics only, deterministic), ``<exp>.timing.csv``
    (per-row wall time) and ``<exp>.summary.json``; return the summary."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = run_rows(cfg, workers)
    name = cfg.experiment
    write_csv(out / f"{name}.csv", columns_for(name), rows)
    write_csv(out / f"{name}.timing.csv", LEAD_COLUMNS + ["wall_time"], rows)
    summary = summarize(cfg, rows)
    with open(out / f"{name}.summary.json", "w", newline="\n") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return summary
