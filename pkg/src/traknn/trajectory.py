"""Row-by-row trajectory distances from the spatial distance matrix.

Row ``t`` holds ``D[t, j] = sum_{q<d} S[t+q, j+q]`` for ``j = 0 .. m-1``.
Row 0 is summed explicitly; every later row follows from its predecessor
in O(m) work regardless of ``d``::

    D[t, j] = D[t-1, j-1] - S[t-1, j-1] + S[t+d-1, j+d-1]      (j >= 1)
    D[t, 0] = D[0, t]                                           (symmetry)

Only row 0, the previous row and the current row are alive at any time.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# arithmetic per recurrence entry: one subtraction, one addition, one clamp
OPS_PER_ENTRY = 3


@dataclass
class RowCounter:
    """Instrumentation filled by :func:`stream_rows`."""

    rows: int = 0
    recurrence_rows: int = 0
    refreshed_rows: int = 0
    init_ops: int = 0
    row_ops: list = field(default_factory=list)


def _matrix(S):
    if isinstance(S, np.ndarray):
        return S
    return S.data


def direct_row(S, t, d):
    """Row ``t`` by explicit summation over the ``d`` diagonal offsets; O(d*m)."""
    s = _matrix(S)
    n = s.shape[0]
    m = n - d + 1
    row = np.zeros(m, dtype=np.float64)
    for q in range(d):
        row += s[t + q, q:q + m]
    return row


def init_first_row(S, d):
    """Trajectory distances from trajectory 0 to every trajectory."""
    s = _matrix(S)
    if not 1 <= d <= s.shape[0]:
        raise ValueError(f"d={d} outside [1, {s.shape[0]}]")
    return direct_row(s, 0, d)


def recurrence_step(prev, first, S, t, d, out=None):
    """Advance from row ``t-1`` (``prev``) to row ``t``.

    ``first`` is row 0, kept for the boundary column. Values are clamped
    at zero.
    """
    s = _matrix(S)
    m = prev.shape[0]
    if out is None:
        out = np.empty(m, dtype=np.float64)
    cur = out[1:]
    np.subtract(prev[:-1], s[t - 1, :m - 1], out=cur)
    cur += s[t + d - 1, d:d + m - 1]
    np.maximum(cur, 0.0, out=cur)
    out[0] = first[t]
    return out


def stream_blocks(S, cfg, consumer, block_rows=64, counter=None):
    """Emit trajectory rows in ascending ``t`` as blocks of consecutive rows.

    ``consumer(t0, block)`` receives rows ``t0 .. t0+len(block)-1`` as one
    ``(rows, m)`` array. The buffer is reused for the next block; copy it
    if it must outlive the call. With ``cfg.refresh = R`` every row whose
    index is a multiple of ``R`` is recomputed by direct summation.
    """
    s = _matrix(S)
    n = s.shape[0]
    d = cfg.d
    if not 1 <= d <= n:
        raise ValueError(f"d={d} outside [1, {n}]")
    m = n - d + 1
    refresh = cfg.refresh
    first = init_first_row(s, d)
    if counter is not None:
        counter.init_ops = d * m
    rows = max(1, min(block_rows, m))
    buf = np.empty((rows, m), dtype=np.float64)
    prev = first
    for t0 in range(0, m, rows):
        count = min(rows, m - t0)
        for i in range(count):
            t = t0 + i
            if t == 0:
                buf[0] = first
                continue
            if refresh is not None and t % refresh == 0:
                buf[i] = direct_row(s, t, d)
                buf[i, 0] = first[t]
                if counter is not None:
                    counter.refreshed_rows += 1
                    counter.row_ops.append(d * m)
            else:
                recurrence_step(prev, first, s, t, d, out=buf[i])
                if counter is not None:
                    counter.recurrence_rows += 1
                    counter.row_ops.append(OPS_PER_ENTRY * (m - 1))
            prev = buf[i]
        consumer(t0, buf[:count])
        # the next block overwrites buf; keep the last row
        prev = buf[count - 1].copy()
    if counter is not None:
        counter.rows = m


def stream_rows(S, cfg, consumer, counter=None):
    """Emit every trajectory row, in ascending ``t``, to ``consumer(t, row)``.

    Holds row 0, the previous row and the current row.
    """

    def one(t0, block):
        consumer(t0, block[0])

    stream_blocks(S, cfg, one, block_rows=1, counter=counter)


def collect_rows(S, cfg):
    """Materialise the full ``m x m`` trajectory distance matrix (opt-in, O(m^2) memory)."""
    s = _matrix(S)
    m = s.shape[0] - cfg.d + 1
    full = np.empty((m, m), dtype=np.float64)

    def keep(t, row):
        full[t] = row

    stream_rows(s, cfg, keep)
    return full
