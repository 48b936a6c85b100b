"""Pairwise squared distances between spatial fields.

The full ``n x n`` matrix ``S`` is assembled from square tiles of edge
``b``. Each tile is one dense matrix product between two panels of
flattened fields, turned into distances with the cached squared norms:
``S[u, v] = N[u] + N[v] - 2 <x_u, x_v>``. Only tiles on or above the
block diagonal are computed; the lower triangle is filled by copy.
"""

from __future__ import annotations

import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from .errors import LengthMismatchError, MalformedHeaderError, MemoryBudgetError, UnsupportedDtypeError
from .field_store import CODE_OF_DTYPE, DTYPE_CODES

TRKS_MAGIC = b"TRKS"
TRKS_VERSION = 1
_TRKS_HEADER = struct.Struct("<4sIIQ")


@dataclass(eq=False)
class SpatialDistanceMatrix:
    """Symmetric matrix of squared field distances.

    Attributes
    ----------
    data : ndarray, shape (n, n)
        Squared distances; exact zeros on the diagonal, lower triangle a copy
        of the upper triangle.
    tiles_computed : int
        Number of tiles evaluated by the kernel (mirrored tiles excluded).
    """

    data: np.ndarray
    tiles_computed: int = 0

    @property
    def n(self):
        return self.data.shape[0]

    @property
    def dtype(self):
        return self.data.dtype


def squared_norms(seq):
    """Squared Frobenius norm of every field, accumulated in float64."""
    x = seq.flat()
    out = np.empty(seq.n, dtype=np.float64)
    # chunked so a float32 input is never fully duplicated as float64
    step = max(1, (1 << 22) // max(1, x.shape[1]))
    for lo in range(0, seq.n, step):
        block = x[lo:lo + step].astype(np.float64, copy=False)
        out[lo:lo + step] = np.einsum("ij,ij->i", block, block)
    return out


def _panel(x, rows):
    return np.ascontiguousarray(x[rows], dtype=np.float64)


def distance_tile(seq, norms, rows, cols):
    """Squared distances between fields in ``rows`` and fields in ``cols``.

    ``rows`` and ``cols`` are ``range`` or ``slice`` objects over ``[0, n)``.
    Entries are clamped below at zero; pairs with the same index get an
    exact zero.
    """
    x = seq.flat()
    rows = _as_slice(rows)
    cols = _as_slice(cols)
    return _tile(_panel(x, rows), _panel(x, cols), norms[rows], norms[cols],
                 rows.start, cols.start)


def _as_slice(r):
    if isinstance(r, slice):
        return r
    return slice(r.start, r.stop)


def _tile(a, b, na, nb, r0, c0):
    g = a @ b.T
    g *= -2.0
    g += na[:, None]
    g += nb[None, :]
    np.maximum(g, 0.0, out=g)
    # identical global index -> self-distance
    lo, hi = max(r0, c0), min(r0 + a.shape[0], c0 + b.shape[0])
    if lo < hi:
        idx = np.arange(lo, hi)
        g[idx - r0, idx - c0] = 0.0
    return g


def matrix_nbytes(n, dtype):
    return int(n) * int(n) * np.dtype(dtype).itemsize


def allocate(n, dtype, budget=None):
    nbytes = matrix_nbytes(n, dtype)
    if budget is not None and nbytes > budget:
        raise MemoryBudgetError(nbytes, budget)
    try:
        return np.empty((n, n), dtype=dtype)
    except MemoryError:
        raise MemoryBudgetError(nbytes, budget) from None


def spatial_distance_matrix(seq, cfg, norms=None):
    """Assemble the full spatial distance matrix of ``seq``.

    Tile pairs ``(I, J)`` with ``J >= I`` are distributed over
    ``cfg.resolved_threads()`` workers, each running single-threaded BLAS.
    Every entry is written by exactly one tile, so the result does not
    depend on the worker count.
    """
    n = seq.n
    dtype = cfg.storage_dtype(seq.dtype)
    out = allocate(n, dtype, cfg.resolved_budget())
    if norms is None:
        norms = squared_norms(seq)
    x = seq.flat()
    b = min(cfg.b, n)
    starts = list(range(0, n, b))
    threads = cfg.resolved_threads()

    def row_block(i0):
        i1 = min(i0 + b, n)
        a = _panel(x, slice(i0, i1))
        count = 0
        for j0 in range(i0, n, b):
            j1 = min(j0 + b, n)
            bj = a if j0 == i0 else _panel(x, slice(j0, j1))
            g = _tile(a, bj, norms[i0:i1], norms[j0:j1], i0, j0)
            out[i0:i1, j0:j1] = g
            if j0 != i0:
                out[j0:j1, i0:i1] = out[i0:i1, j0:j1].T
            count += 1
        return count

    with threadpool_limits(limits=1, user_api="blas"):
        if threads == 1 or len(starts) == 1:
            tiles = sum(row_block(i0) for i0 in starts)
        else:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                tiles = sum(pool.map(row_block, starts))

    # diagonal tiles: copy upper triangle onto lower so S is bit-symmetric
    for i0 in starts:
        i1 = min(i0 + b, n)
        blk = out[i0:i1, i0:i1]
        il = np.tril_indices(i1 - i0, -1)
        blk[il] = blk.T[il]
    np.fill_diagonal(out, 0)
    return SpatialDistanceMatrix(out, tiles)


def expected_tiles(n, b):
    q = -(-n // min(b, n))
    return q * (q + 1) // 2


# ---------------------------------------------------------------- persistence


def save_matrix(sdm, path):
    """Write ``S`` to a TRKS container: magic, u32 version, u32 dtype code, u64 n, n*n entries."""
    data = sdm.data if isinstance(sdm, SpatialDistanceMatrix) else np.asarray(sdm)
    code = CODE_OF_DTYPE[data.dtype]
    with open(path, "wb") as fh:
        fh.write(_TRKS_HEADER.pack(TRKS_MAGIC, TRKS_VERSION, code, data.shape[0]))
        fh.write(data.astype(data.dtype.newbyteorder("<"), copy=False).tobytes(order="C"))


def load_matrix(path):
    path = Path(path)
    with open(path, "rb") as fh:
        head = fh.read(_TRKS_HEADER.size)
        if len(head) < _TRKS_HEADER.size:
            raise MalformedHeaderError(f"{path}: truncated TRKS header")
        magic, version, code, n = _TRKS_HEADER.unpack(head)
        if magic != TRKS_MAGIC or version != TRKS_VERSION:
            raise MalformedHeaderError(f"{path}: not a TRKS v{TRKS_VERSION} file")
        if code not in DTYPE_CODES:
            raise UnsupportedDtypeError(f"{path}: unknown dtype code {code}")
        dtype = DTYPE_CODES[code]
        data = np.fromfile(fh, dtype=dtype)
    if data.size != n * n:
        raise LengthMismatchError(f"{path}: expected {n * n} entries, found {data.size}")
    return SpatialDistanceMatrix(data.reshape(n, n).astype(dtype.newbyteorder("="), copy=False))
