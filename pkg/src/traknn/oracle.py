"""Brute-force reference computations.

Nothing here touches the spatial matrix, the norm decomposition or the
recurrence: every distance is a direct sum of squared differences in
float64. Slow on purpose; keep ``n`` below about a thousand.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import InfeasibleConfigError


def naive_field_distance(seq, i, j):
    """Squared distance between fields ``i`` and ``j``, exactly rounded."""
    a = seq.values[i].ravel().tolist()
    b = seq.values[j].ravel().tolist()
    return math.fsum((float(p) - float(q)) ** 2 for p, q in zip(a, b))


def naive_trajectory_distance(seq, i, j, d):
    """Squared distance between the length-``d`` trajectories starting at ``i`` and ``j``."""
    if i + d > seq.n or j + d > seq.n:
        raise IndexError(f"trajectory of length {d} at {max(i, j)} runs past n={seq.n}")
    return math.fsum(naive_field_distance(seq, i + q, j + q) for q in range(d))


def trajectory_vectors(seq, d):
    """Every trajectory flattened into one float64 row of length ``d*h*w``."""
    x = seq.values.astype(np.float64).reshape(seq.n, -1)
    m = seq.n - d + 1
    return np.stack([x[t:t + d].ravel() for t in range(m)])


def naive_distance_row(vectors, t):
    diff = vectors - vectors[t]
    return np.einsum("ij,ij->i", diff, diff)


def naive_rarity(seq, d, k_values, e):
    """Scores and neighbor lists by exhaustive search.

    Parameters
    ----------
    seq : FieldSequence
    d : int
    k_values : int or sequence of int
    e : int

    Returns
    -------
    scores : dict
        ``k -> ndarray (m,)``.
    neighbors : dict
        ``k -> ndarray (m, k)`` of indices.
    distances : dict
        ``k -> ndarray (m, k)``.
    """
    ks = sorted({int(k_values)} if np.isscalar(k_values) else {int(k) for k in k_values})
    m = seq.n - d + 1
    if m < 1:
        raise InfeasibleConfigError(0, ks[-1])
    worst = m - min(m, 2 * e + 1)
    if worst < ks[-1]:
        raise InfeasibleConfigError(worst, ks[-1])
    vec = trajectory_vectors(seq, d)
    idx = np.arange(m)
    scores = {k: np.empty(m) for k in ks}
    neighbors = {k: np.empty((m, k), dtype=np.int64) for k in ks}
    distances = {k: np.empty((m, k)) for k in ks}
    for t in range(m):
        row = naive_distance_row(vec, t)
        keep = np.abs(idx - t) > e
        cand_idx, cand_d = idx[keep], row[keep]
        order = np.lexsort((cand_idx, cand_d))
        for k in ks:
            chosen = order[:k]
            neighbors[k][t] = cand_idx[chosen]
            distances[k][t] = cand_d[chosen]
            scores[k][t] = cand_d[chosen].sum() / k
    return scores, neighbors, distances


def naive_spatial_matrix(seq):
    """All pairwise field distances by direct differencing (float64)."""
    x = seq.values.astype(np.float64).reshape(seq.n, -1)
    out = np.empty((seq.n, seq.n))
    for i in range(seq.n):
        diff = x - x[i]
        out[i] = np.einsum("ij,ij->i", diff, diff)
    return out
