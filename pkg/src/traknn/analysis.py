"""Post-hoc statistics over rarity output.

Local intrinsic dimension uses the Levina-Bickel maximum-likelihood
estimator on Euclidean neighbor distances ``T_1 <= ... <= T_k``::

    ID = [ (1/(k-1)) * sum_{j<k} ln(T_k / T_j) ]^-1

The engine works in squared distances; square roots are taken here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from .config import RunConfig
from .errors import ConfigError
from .field_store import FieldSequence
from .rarity import rarity_scores, top_rare
from .spatial import spatial_distance_matrix


@dataclass
class IdEstimate:
    """Pooled local intrinsic-dimension statistics.

    ``per_point`` has shape ``(len(k_values), m)``; non-finite entries mark
    points where the estimator is undefined (duplicates or all-equal
    distances) and are left out of ``mean`` and ``std``.
    """

    per_point: np.ndarray
    mean: float
    std: float
    k_values: tuple
    discarded: int


def local_id_mle(nn_sq_distances, k=None):
    """Local intrinsic dimension from the ascending squared distances to the ``k`` nearest neighbors.

    Returns ``nan`` when any neighbor distance is zero and ``inf`` when all
    ``k`` distances are equal.
    """
    sq = np.asarray(nn_sq_distances, dtype=np.float64)
    if k is None:
        k = sq.shape[-1]
    if k < 2:
        raise ConfigError("local ID needs k >= 2")
    if sq.shape[-1] < k:
        raise ConfigError(f"need {k} neighbor distances, got {sq.shape[-1]}")
    return _local_id(sq[..., :k])


def _local_id(sq):
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.sqrt(sq)
        logs = np.log(r[..., -1:] / r[..., :-1])
        total = logs.sum(axis=-1)
        out = (sq.shape[-1] - 1) / total
    zero = (sq <= 0).any(axis=-1)
    out = np.where(zero, np.nan, out)
    return float(out) if out.ndim == 0 else out


def macro_id(nn_sq_distances, k_values):
    """Local IDs for every point and every ``k``, pooled into one mean and std.

    Parameters
    ----------
    nn_sq_distances : array, shape (m, k_max)
        Ascending squared neighbor distances per point, e.g.
        ``RarityReport.distances``.
    k_values : iterable of int
    """
    dist = np.asarray(nn_sq_distances, dtype=np.float64)
    ks = tuple(sorted({int(k) for k in k_values}))
    if not ks:
        raise ConfigError("k_values is empty")
    if ks[-1] > dist.shape[1]:
        raise ConfigError(f"k={ks[-1]} exceeds the {dist.shape[1]} available neighbors")
    per = np.stack([np.atleast_1d(local_id_mle(dist, k)) for k in ks])
    finite = per[np.isfinite(per)]
    mean = float(finite.mean()) if finite.size else math.nan
    std = float(finite.std()) if finite.size else math.nan
    return IdEstimate(per, mean, std, ks, int(per.size - finite.size))


def point_cloud_id(points, k_values, threads=None):
    """Macro ID of a point cloud, reusing the kNN engine with ``d=1, e=0``."""
    pts = np.asarray(points, dtype=np.float64)
    seq = FieldSequence(pts.reshape(pts.shape[0], 1, -1))
    ks = tuple(sorted(k_values))
    cfg = RunConfig(d=1, e=0, k=ks[-1], k_values=ks, storage="float64", threads=threads)
    report = rarity_scores(spatial_distance_matrix(seq, cfg), cfg)
    return macro_id(report.distances, ks)


def spearman(scores_a, scores_b):
    """Spearman rank correlation with average ranks for ties.

    Returns ``nan`` when either ranking has zero variance.
    """
    a = np.asarray(scores_a, dtype=np.float64)
    b = np.asarray(scores_b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ConfigError("spearman needs two 1-D arrays of equal length")
    if a.size < 2:
        raise ConfigError("spearman needs at least two values")
    ra = rankdata(a) - (a.size + 1) / 2
    rb = rankdata(b) - (b.size + 1) / 2
    denom = math.sqrt(float(ra @ ra) * float(rb @ rb))
    if denom == 0:
        return math.nan
    return float(np.clip(float(ra @ rb) / denom, -1.0, 1.0))


def top_set_overlap(report_a, report_b, count, k=None):
    """Size of the intersection of two top-``count`` sets and Spearman over it.

    ``k`` defaults to the largest ``k`` shared by both reports. The
    correlation is ``nan`` for fewer than two common trajectories.
    """
    if k is None:
        shared = set(report_a.k_values) & set(report_b.k_values)
        if not shared:
            raise ConfigError("reports share no k value")
        k = max(shared)
    if report_a.m != report_b.m:
        raise ConfigError(f"reports cover different ranges ({report_a.m} vs {report_b.m})")
    top_a = {t for t, _ in top_rare(report_a, k, count)}
    top_b = {t for t, _ in top_rare(report_b, k, count)}
    common = np.array(sorted(top_a & top_b), dtype=np.int64)
    if common.size < 2:
        return int(common.size), math.nan
    rho = spearman(report_a.scores_for(k)[common], report_b.scores_for(k)[common])
    return int(common.size), rho
