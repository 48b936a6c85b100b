"""Scaling sweeps on synthetic data and memory-footprint accounting."""

from __future__ import annotations

import csv
import hashlib
import json
import os
import platform
import statistics
import time
import tracemalloc
from dataclasses import dataclass, field, replace

import numpy as np

from . import __version__
from .config import RunConfig
from .field_store import synth
from .pipeline import score_sequence
from .rarity import BLOCK_ROWS
from .spatial import matrix_nbytes

PHASES = ("norms", "spatial", "recurrence_knn")
SWEEP_VARIABLES = ("n", "hw", "d", "k")

# desk-scale defaults and the full-scale reference point
DESK_DIMS = {"n": 4000, "h": 16, "w": 16}
FULL_SCALE_DIMS = {"n": 27000, "h": 180, "w": 280}


@dataclass
class BenchRecord:
    variable: str
    value: int
    config: dict
    reps: int = 0
    median: dict = field(default_factory=dict)
    raw: list = field(default_factory=list)
    s_bytes: int = 0
    peak_bytes: int | None = None
    checksum: str | None = None
    skipped: str | None = None

    @property
    def total(self):
        return sum(self.median.get(p, 0.0) for p in PHASES)


def predict_memory(n, h, w, cfg, dtype=np.float32):
    """Predicted resident bytes of one pass, by component."""
    dtype = np.dtype(dtype)
    m = n - cfg.d + 1
    s_dtype = cfg.storage_dtype(dtype)
    parts = {
        "data": n * h * w * dtype.itemsize,
        "S": matrix_nbytes(n, s_dtype),
        "norms": n * 8,
        # first row, carried row, row block
        "rows": (2 + min(BLOCK_ROWS, m)) * m * 8,
        "results": m * cfg.k_max * 16 + m * 8 * len(cfg.k_values),
    }
    # per worker: product tile plus two float64 panels; selection: masked copy and partition copy
    b = min(cfg.b, n)
    parts["workspace"] = max(
        cfg.resolved_threads() * (b * b * 8 + 2 * b * h * w * 8),
        2 * min(BLOCK_ROWS, m) * m * 8,
    )
    parts["total"] = sum(parts.values())
    return parts


def default_budget():
    try:
        import psutil
        return int(psutil.virtual_memory().available * 0.8)
    except ImportError:  # pragma: no cover
        return None


def score_checksum(report, k=None):
    k = report.k_values[-1] if k is None else k
    return hashlib.sha256(np.ascontiguousarray(report.scores_for(k)).tobytes()).hexdigest()[:16]


def measure_peak(seq, cfg):
    """Peak traced allocation of one pass plus the resident input, in bytes."""
    if tracemalloc.is_tracing():
        raise RuntimeError("tracemalloc already active")
    tracemalloc.start()
    try:
        score_sequence(seq, cfg)
        _, peak = tracemalloc.get_traced_memory()
    finally:
        tracemalloc.stop()
    return seq.nbytes() + peak


def memory_report(cfg, n, h, w, dtype=np.float32, seed=0, measure=True):
    """Predicted and, if possible, measured peak bytes of one pass."""
    pred = predict_memory(n, h, w, cfg, dtype)
    out = {"n": n, "h": h, "w": w, "d": cfg.d, "k": cfg.k_max, "predicted": pred,
           "measured": None, "ratio": None, "instrumented": False}
    if not measure:
        return out
    seq = synth(n, h, w, "gaussian", seed=seed, dtype=dtype)
    measured = measure_peak(seq, cfg)
    out.update(measured=measured, ratio=measured / pred["total"], instrumented=True)
    return out


def _point(variable, value, base_dims, base_cfg):
    dims = dict(base_dims)
    cfg = base_cfg
    if variable == "n":
        dims["n"] = value
    elif variable == "hw":
        dims["h"] = dims["w"] = value
    elif variable == "d":
        cfg = replace(cfg, d=value, e=None if base_cfg.e == base_cfg.d else base_cfg.e)
    elif variable == "k":
        cfg = replace(cfg, k=value, k_values=())
    else:
        raise ValueError(f"unknown sweep variable {variable!r}; expected one of {SWEEP_VARIABLES}")
    return dims, cfg


def sweep(variable, values, base_cfg=None, base_dims=None, reps=3, seed=0, dtype=np.float32,
          measure_memory=False, budget=None, log=None):
    """Time the full pass over a range of one parameter.

    Each point gets fresh synthetic data from ``seed``, one discarded
    warm-up run and ``reps`` timed runs. Points whose predicted footprint
    exceeds ``budget`` are skipped, not timed.
    """
    if reps < 3:
        raise ValueError("reps must be >= 3")
    base_cfg = base_cfg or RunConfig(d=1, k=1)
    base_dims = base_dims or dict(DESK_DIMS)
    budget = budget if budget is not None else (base_cfg.resolved_budget() or default_budget())
    records = []
    for value in values:
        dims, cfg = _point(variable, value, base_dims, base_cfg)
        n, h, w = dims["n"], dims["h"], dims["w"]
        rec = BenchRecord(variable, int(value), {**cfg.echo(), **dims, "dtype": np.dtype(dtype).name,
                                                   "seed": seed})
        rec.s_bytes = matrix_nbytes(n, cfg.storage_dtype(dtype))
        pred = predict_memory(n, h, w, cfg, dtype)["total"]
        if budget is not None and pred > budget:
            rec.skipped = f"predicted {pred} bytes exceeds budget {budget}"
            records.append(rec)
            continue
        try:
            cfg.check(n)
        except ValueError as exc:
            rec.skipped = str(exc)
            records.append(rec)
            continue
        seq = synth(n, h, w, "gaussian", seed=seed, dtype=dtype)
        score_sequence(seq, cfg)
        sums = set()
        for _ in range(reps):
            t0 = time.perf_counter()
            report = score_sequence(seq, cfg)
            wall = time.perf_counter() - t0
            row = dict(report.provenance["timings"])
            row["wall"] = wall
            rec.raw.append(row)
            sums.add(score_checksum(report))
        if len(sums) != 1:
            raise RuntimeError(f"scores changed between repetitions at {variable}={value}")
        rec.checksum = sums.pop()
        rec.reps = reps
        rec.median = {p: statistics.median(r[p] for r in rec.raw) for p in PHASES + ("wall",)}
        if measure_memory:
            rec.peak_bytes = measure_peak(seq, cfg)
        if log:
            log(f"{variable}={value}: total {rec.total:.4f}s "
                + " ".join(f"{p}={rec.median[p]:.4f}" for p in PHASES))
        records.append(rec)
        del seq
    return records


def loglog_slope(xs, ys):
    """Least-squares slope of ``log(ys)`` against ``log(xs)``."""
    return float(np.polyfit(np.log(np.asarray(xs, float)), np.log(np.asarray(ys, float)), 1)[0])


def write_csv(records, path):
    cols = ["variable", "value", "rep", *PHASES, "total", "wall", "s_bytes", "peak_bytes",
            "checksum", "skipped"]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(cols)
        for rec in records:
            common = [rec.s_bytes, rec.peak_bytes if rec.peak_bytes is not None else "",
                      rec.checksum or "", rec.skipped or ""]
            for i, r in enumerate(rec.raw):
                writer.writerow([rec.variable, rec.value, i, *(repr(r[p]) for p in PHASES),
                                 repr(sum(r[p] for p in PHASES)), repr(r["wall"]), *common])
            if rec.skipped:
                writer.writerow([rec.variable, rec.value, "median", "", "", "", "", "", *common])
            else:
                writer.writerow([rec.variable, rec.value, "median", *(repr(rec.median[p]) for p in PHASES),
                                 repr(rec.total), repr(rec.median["wall"]), *common])


def environment():
    from threadpoolctl import threadpool_info

    return {
        "software": f"traknn {__version__}",
        "python": platform.python_version(),
        "numpy": np.__version__,
        "platform": platform.platform(),
        "cpu": platform.processor() or platform.machine(),
        "cores": os.cpu_count(),
        "blas": [{k: i.get(k) for k in ("internal_api", "version", "num_threads")} for i in threadpool_info()],
    }


def write_environment(path, extra=None):
    env = environment()
    env.update(extra or {})
    with open(path, "w") as fh:
        json.dump(env, fh, indent=2, sort_keys=True)
