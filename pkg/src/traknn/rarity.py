"""k-nearest-neighbor rarity scores over streamed trajectory rows.

The rarity of trajectory ``t`` is the mean squared distance to its ``k``
nearest admissible neighbors, where ``j`` is admissible when
``|t - j| > e``. One selection of ``k_max`` neighbors per row serves every
smaller ``k``: the ``k`` nearest are the first ``k`` of the ``k_max``
nearest, so each score is a prefix mean.

Ties are broken by the smaller index everywhere.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, FormatError, InfeasibleConfigError
from .trajectory import stream_blocks

BLOCK_ROWS = 64


@dataclass(frozen=True)
class RarityResult:
    """Score and sorted neighbor list of one trajectory for one ``k``."""

    t: int
    k: int
    score: float
    neighbors: tuple  # ((j, distance), ...) ascending by distance, then j


@dataclass(eq=False)
class RarityReport:
    """Scores for every trajectory and every requested ``k``.

    Attributes
    ----------
    config : dict
        Resolved run configuration plus preprocessing flags.
    neighbors : ndarray of int, shape (m, k_max)
    distances : ndarray of float64, shape (m, k_max)
    scores : dict
        ``k -> ndarray of shape (m,)``.
    provenance : dict
        Input digest, software version, phase timings.
    """

    config: dict
    neighbors: np.ndarray
    distances: np.ndarray
    scores: dict
    provenance: dict = field(default_factory=dict)

    @property
    def k_values(self):
        return sorted(self.scores)

    @property
    def m(self):
        return self.neighbors.shape[0]

    def scores_for(self, k):
        if k not in self.scores:
            raise ConfigError(f"k={k} not in report (available: {self.k_values})")
        return self.scores[k]

    def result(self, t, k):
        s = self.scores_for(k)
        pairs = tuple((int(j), float(dv)) for j, dv in zip(self.neighbors[t, :k], self.distances[t, :k]))
        return RarityResult(int(t), int(k), float(s[t]), pairs)

    def results(self):
        for k in self.k_values:
            for t in range(self.m):
                yield self.result(t, k)


def admissible_count(m, t, e):
    lo, hi = max(0, t - e), min(m, t + e + 1)
    return m - (hi - lo)


def select_k(row, t, k_max, e, work=None):
    """Indices and distances of the ``k_max`` smallest admissible entries of ``row``.

    Returns ``(idx, dist)`` sorted ascending by distance, ties by index.
    ``work`` is an optional scratch buffer of the row's length.
    """
    m = row.shape[0]
    available = admissible_count(m, t, e)
    if available < k_max:
        raise InfeasibleConfigError(available, k_max)
    masked = work if work is not None else np.empty(m, dtype=np.float64)
    masked[:] = row
    masked[max(0, t - e):min(m, t + e + 1)] = np.inf
    kth = np.partition(masked, k_max - 1)[k_max - 1]
    below = np.flatnonzero(masked < kth)
    at = np.flatnonzero(masked == kth)[:k_max - below.size]
    idx = np.concatenate((below, at))
    dist = masked[idx]
    order = np.lexsort((idx, dist))
    return idx[order], dist[order]


def select_block(block, t0, k_max, e):
    """:func:`select_k` applied to consecutive rows ``t0 ..`` of ``block`` at once.

    Rows whose ``k_max``-th smallest admissible value is tied fall back to
    :func:`select_k` so the smaller-index rule still holds.
    """
    rows, m = block.shape
    masked = block.copy()
    for i in range(rows):
        t = t0 + i
        masked[i, max(0, t - e):min(m, t + e + 1)] = np.inf
    kth = np.partition(masked, k_max - 1, axis=1)[:, k_max - 1]
    if not np.isfinite(kth).all():
        bad = int(np.flatnonzero(~np.isfinite(kth))[0])
        raise InfeasibleConfigError(admissible_count(m, t0 + bad, e), k_max)
    chosen = masked <= kth[:, None]
    per_row = chosen.sum(axis=1)
    idx = np.empty((rows, k_max), dtype=np.int64)
    dist = np.empty((rows, k_max), dtype=np.float64)
    clean = per_row == k_max
    if clean.all():
        r, c = np.nonzero(chosen)
        idx[:] = c.reshape(rows, k_max)
    else:
        r, c = np.nonzero(chosen[clean])
        idx[clean] = c.reshape(-1, k_max)
        for i in np.flatnonzero(~clean):
            idx[i], _ = select_k(block[i], t0 + i, k_max, e)
    dist[:] = np.take_along_axis(masked, idx, axis=1)
    order = np.lexsort((idx, dist), axis=1)
    return np.take_along_axis(idx, order, axis=1), np.take_along_axis(dist, order, axis=1)


def rarity_scores(S, cfg, counter=None, config_extra=None, block_rows=BLOCK_ROWS):
    """Stream trajectory rows of ``S`` and score every trajectory for every ``k`` in ``cfg``."""
    n = S.shape[0] if isinstance(S, np.ndarray) else S.n
    cfg.check(n)
    m = cfg.n_trajectories(n)
    k_max, e = cfg.k_max, cfg.e
    nbr = np.empty((m, k_max), dtype=np.int64)
    dst = np.empty((m, k_max), dtype=np.float64)

    def consume(t0, block):
        t1 = t0 + block.shape[0]
        nbr[t0:t1], dst[t0:t1] = select_block(block, t0, k_max, e)

    stream_blocks(S, cfg, consume, block_rows=block_rows, counter=counter)
    config = cfg.echo()
    config.update(config_extra or {})
    return RarityReport(config, nbr, dst, prefix_scores(dst, cfg.k_values))


def prefix_scores(distances, k_values):
    csum = np.cumsum(distances, axis=1)
    return {int(k): csum[:, k - 1] / k for k in k_values}


def top_rare(report, k, count):
    """The ``count`` highest-scoring trajectories for ``k`` as ``[(t, score), ...]``.

    Overlapping windows of one event are not merged.
    """
    s = report.scores_for(k)
    if not 0 <= count <= s.shape[0]:
        raise ConfigError(f"count={count} outside [0, {s.shape[0]}]")
    order = np.lexsort((np.arange(s.shape[0]), -s))[:count]
    return [(int(t), float(s[t])) for t in order]


# ---------------------------------------------------------------- report files


def sidecar_path(path):
    return Path(path).with_suffix(".json")


def write_report(report, path):
    """Write ``report`` as CSV plus a JSON sidecar next to it.

    CSV columns: ``t,k,score,neighbor_1,dist_1,...,neighbor_k,dist_k``;
    rows are grouped by ``k`` then ascending ``t``.
    """
    path = Path(path)
    k_max = report.neighbors.shape[1]
    header = ["t", "k", "score"]
    for i in range(1, k_max + 1):
        header += [f"neighbor_{i}", f"dist_{i}"]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        nbr = report.neighbors.tolist()
        dst = report.distances.tolist()
        for k in report.k_values:
            s = report.scores[k].tolist()
            for t in range(report.m):
                line = [t, k, repr(s[t])]
                for j, dv in zip(nbr[t][:k], dst[t][:k]):
                    line += [j, repr(dv)]
                writer.writerow(line)
    meta = {"config": report.config, "k_values": report.k_values, "m": report.m,
            "provenance": report.provenance}
    sidecar_path(path).write_text(json.dumps(meta, indent=2, sort_keys=True))


def read_report(path):
    path = Path(path)
    meta_path = sidecar_path(path)
    meta = json.loads(meta_path.read_text()) if meta_path.exists() else {}
    rows = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[:3] != ["t", "k", "score"]:
            raise FormatError(f"{path}: not a rarity report")
        for line in reader:
            if not line:
                continue
            rows.setdefault(int(line[1]), []).append(line)
    if not rows:
        raise FormatError(f"{path}: empty report")
    k_max = max(rows)
    m = len(rows[k_max])
    nbr = np.empty((m, k_max), dtype=np.int64)
    dst = np.empty((m, k_max), dtype=np.float64)
    scores = {}
    for k, lines in rows.items():
        if len(lines) != m:
            raise FormatError(f"{path}: k={k} covers {len(lines)} trajectories, expected {m}")
        s = np.empty(m, dtype=np.float64)
        for line in lines:
            t = int(line[0])
            s[t] = float(line[2])
            if k == k_max:
                pairs = line[3:3 + 2 * k]
                nbr[t] = [int(v) for v in pairs[0::2]]
                dst[t] = [float(v) for v in pairs[1::2]]
        scores[k] = s
    return RarityReport(meta.get("config", {}), nbr, dst, scores, meta.get("provenance", {}))
