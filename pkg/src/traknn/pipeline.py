"""End-to-end rarity pass: norms, spatial matrix, recurrence + kNN."""

from __future__ import annotations

import hashlib
import time

from . import __version__
from .rarity import rarity_scores
from .spatial import spatial_distance_matrix, squared_norms


def file_digest(path, chunk=1 << 20):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        while block := fh.read(chunk):
            h.update(block)
    return "sha256:" + h.hexdigest()


def score_sequence(seq, cfg, S=None, counter=None, input_digest=None, config_extra=None):
    """Run the full pass over ``seq`` and return a :class:`~traknn.rarity.RarityReport`.

    A precomputed spatial matrix ``S`` skips the first two phases.
    Feasibility is checked before any heavy work.
    """
    cfg.check(seq.n)
    timings = {}
    if S is None:
        t0 = time.perf_counter()
        norms = squared_norms(seq)
        t1 = time.perf_counter()
        S = spatial_distance_matrix(seq, cfg, norms=norms)
        t2 = time.perf_counter()
        timings["norms"] = t1 - t0
        timings["spatial"] = t2 - t1
    else:
        timings["norms"] = timings["spatial"] = 0.0
    t3 = time.perf_counter()
    extra = {"n": seq.n, "h": seq.h, "w": seq.w, "dtype": str(seq.dtype)}
    extra.update(config_extra or {})
    report = rarity_scores(S, cfg, counter=counter, config_extra=extra)
    timings["recurrence_knn"] = time.perf_counter() - t3
    report.provenance.update({
        "software": f"traknn {__version__}",
        "input_digest": input_digest,
        "timings": timings,
        "tiles_computed": getattr(S, "tiles_computed", None),
    })
    return report
