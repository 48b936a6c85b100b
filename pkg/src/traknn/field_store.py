"""Spatio-temporal field sequences: data model, file formats, preprocessing
and deterministic synthetic generators.

TRAK binary layout (little-endian)::

    offset  size  content
    0       4     magic b"TRAK"
    4       4     u32 format version (1)
    8       4     u32 dtype code (0 = float32, 1 = float64)
    12      8     u64 n
    20      8     u64 h
    28      8     u64 w
    36      ...   n*h*w elements, field-major, row-major inside a field

The CSV fallback has a header line ``n,h,w`` followed by one line of
``h*w`` comma-separated values per time step.
"""

from __future__ import annotations

import csv
import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    ConfigError,
    LengthMismatchError,
    MalformedHeaderError,
    NonFiniteValueError,
    UnsupportedDtypeError,
)

TRAK_MAGIC = b"TRAK"
TRAK_VERSION = 1
_HEADER = struct.Struct("<4sIIQQQ")

DTYPE_CODES = {0: np.dtype("<f4"), 1: np.dtype("<f8")}
CODE_OF_DTYPE = {np.dtype("float32"): 0, np.dtype("float64"): 1}

SYNTH_KINDS = ("gaussian", "smooth", "planted")


@dataclass(frozen=True)
class GridMeta:
    """Informational grid descriptor; never read by the distance engine."""

    latitudes: tuple | None = None
    longitudes: tuple | None = None
    start: str | None = None
    step: str | None = None


@dataclass(frozen=True, eq=False)
class FieldSequence:
    """``n`` spatial fields of shape ``(h, w)`` stored as one C-contiguous array.

    The array is made read-only on construction.
    """

    values: np.ndarray
    meta: GridMeta | None = None

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.ndim != 3:
            raise ConfigError(f"values must have shape (n, h, w), got ndim={v.ndim}")
        if v.dtype not in CODE_OF_DTYPE:
            raise UnsupportedDtypeError(f"unsupported element dtype {v.dtype}")
        if min(v.shape) < 1:
            raise ConfigError(f"n, h, w must all be >= 1, got {v.shape}")
        if not np.isfinite(v).all():
            bad = np.argwhere(~np.isfinite(v))[0]
            raise NonFiniteValueError(f"non-finite element at (t, row, col) = {tuple(int(i) for i in bad)}")
        v = np.array(v, order="C", copy=True)
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def n(self):
        return self.values.shape[0]

    @property
    def h(self):
        return self.values.shape[1]

    @property
    def w(self):
        return self.values.shape[2]

    @property
    def dtype(self):
        return self.values.dtype

    def flat(self):
        """View of the data as an ``(n, h*w)`` matrix, one field per row."""
        return self.values.reshape(self.n, self.h * self.w)

    def nbytes(self):
        return self.values.nbytes

    def __eq__(self, other):
        if not isinstance(other, FieldSequence):
            return NotImplemented
        return (
            self.values.dtype == other.values.dtype
            and self.values.shape == other.values.shape
            and self.values.tobytes() == other.values.tobytes()
        )

    def __repr__(self):
        return f"FieldSequence(n={self.n}, h={self.h}, w={self.w}, dtype={self.dtype})"


@dataclass(frozen=True, eq=False)
class GridWeights:
    """Nonnegative weight per grid point, shape ``(h, w)``."""

    weights: np.ndarray

    def __post_init__(self):
        wts = np.array(self.weights, dtype=np.float64)
        if wts.ndim == 1:
            wts = wts.reshape(1, -1)
        if not np.isfinite(wts).all():
            raise NonFiniteValueError("grid weights must be finite")
        if (wts < 0).any():
            raise ConfigError("grid weights must be nonnegative")
        wts.flags.writeable = False
        object.__setattr__(self, "weights", wts)


# ---------------------------------------------------------------- file I/O


def save(seq, path):
    """Write ``seq`` as a TRAK file (or CSV if ``path`` ends in ``.csv``)."""
    path = Path(path)
    if path.suffix.lower() == ".csv":
        return save_csv(seq, path)
    dtype = np.dtype(seq.dtype).newbyteorder("<")
    header = _HEADER.pack(TRAK_MAGIC, TRAK_VERSION, CODE_OF_DTYPE[seq.dtype], seq.n, seq.h, seq.w)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(seq.values.astype(dtype, copy=False).tobytes(order="C"))


def load(path):
    """Read a TRAK file, or a CSV file when the extension is ``.csv``."""
    path = Path(path)
    if path.suffix.lower() == ".csv":
        return load_csv(path)
    raw = path.read_bytes()
    if len(raw) < _HEADER.size:
        raise MalformedHeaderError(f"{path}: file shorter than the {_HEADER.size}-byte header")
    magic, version, code, n, h, w = _HEADER.unpack_from(raw)
    if magic != TRAK_MAGIC:
        raise MalformedHeaderError(f"{path}: bad magic {magic!r}")
    if version != TRAK_VERSION:
        raise MalformedHeaderError(f"{path}: unsupported format version {version}")
    if code not in DTYPE_CODES:
        raise UnsupportedDtypeError(f"{path}: unknown dtype code {code}")
    if min(n, h, w) < 1:
        raise MalformedHeaderError(f"{path}: dimensions must be >= 1, got n={n} h={h} w={w}")
    dtype = DTYPE_CODES[code]
    payload = raw[_HEADER.size:]
    expected = n * h * w
    if len(payload) % dtype.itemsize:
        raise LengthMismatchError(f"{path}: payload of {len(payload)} bytes is not a whole number of elements")
    count = len(payload) // dtype.itemsize
    if count != expected:
        raise LengthMismatchError(f"{path}: header declares {expected} elements, payload holds {count}")
    values = np.frombuffer(payload, dtype=dtype).astype(dtype.newbyteorder("="))
    return FieldSequence(values.reshape(n, h, w))


def save_csv(seq, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([seq.n, seq.h, seq.w])
        for row in seq.flat():
            writer.writerow([repr(float(x)) for x in row])


def load_csv(path, dtype=np.float64):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or len(rows[0]) != 3:
        raise MalformedHeaderError(f"{path}: expected header line 'n,h,w'")
    try:
        n, h, w = (int(x) for x in rows[0])
    except ValueError:
        raise MalformedHeaderError(f"{path}: non-integer header {rows[0]}")
    if min(n, h, w) < 1:
        raise MalformedHeaderError(f"{path}: dimensions must be >= 1")
    body = [r for r in rows[1:] if r]
    if len(body) != n or any(len(r) != h * w for r in body):
        raise LengthMismatchError(f"{path}: expected {n} lines of {h * w} values")
    try:
        values = np.array([[float(x) for x in r] for r in body], dtype=dtype)
    except ValueError as exc:
        raise MalformedHeaderError(f"{path}: unparsable value ({exc})")
    return FieldSequence(values.reshape(n, h, w))


# ---------------------------------------------------------------- preprocessing


def remove_climatology(seq, mode="gridpoint", period=None):
    """Subtract the climatological mean from every field.

    Parameters
    ----------
    seq : FieldSequence
    mode : {"gridpoint", "calendar"}
        ``"gridpoint"`` removes each grid point's mean over all steps;
        ``"calendar"`` removes, at step ``t``, the mean over steps congruent
        to ``t`` modulo ``period``.
    period : int, optional
        Calendar period, required for ``mode="calendar"``.
    """
    x = seq.values.astype(np.float64)
    if mode == "gridpoint":
        out = x - x.mean(axis=0, keepdims=True)
    elif mode == "calendar":
        if period is None or period < 1:
            raise ConfigError("calendar climatology needs a period >= 1")
        if seq.n < period:
            raise ConfigError(f"period {period} exceeds sequence length {seq.n}")
        out = np.empty_like(x)
        for phase in range(period):
            block = x[phase::period]
            out[phase::period] = block - block.mean(axis=0, keepdims=True)
    else:
        raise ConfigError(f"unknown climatology mode {mode!r}")
    return FieldSequence(out.astype(seq.dtype), seq.meta)


def standardize(seq):
    """Divide each grid point by its temporal standard deviation after centering.

    Grid points with zero variance are left at zero.
    """
    x = seq.values.astype(np.float64)
    x = x - x.mean(axis=0, keepdims=True)
    sd = x.std(axis=0, keepdims=True)
    out = np.divide(x, sd, out=np.zeros_like(x), where=sd > 0)
    return FieldSequence(out.astype(seq.dtype), seq.meta)


def apply_weights(seq, gw):
    """Scale each grid point by the square root of its weight.

    Squared distances between the weighted fields equal weighted squared
    distances between the originals.
    """
    wts = gw.weights if isinstance(gw, GridWeights) else GridWeights(gw).weights
    if wts.size != seq.h * seq.w:
        raise ConfigError(f"weights have {wts.size} entries, grid has {seq.h * seq.w}")
    scale = np.sqrt(wts.reshape(1, seq.h, seq.w))
    return FieldSequence((seq.values * scale).astype(seq.dtype), seq.meta)


def cos_lat_weights(latitudes, w):
    """Cosine-of-latitude area weights, one row per latitude, replicated over ``w`` columns."""
    lat = np.asarray(latitudes, dtype=np.float64).ravel()
    if lat.size == 0 or (np.abs(lat) > 90).any() or not np.isfinite(lat).all():
        raise ConfigError("latitudes must lie in [-90, 90] degrees")
    c = np.clip(np.cos(np.deg2rad(lat)), 0.0, None)
    # cos(90 deg) evaluates to ~6e-17
    c[np.abs(lat) == 90] = 0.0
    return GridWeights(np.repeat(c[:, None], int(w), axis=1))


# ---------------------------------------------------------------- synthetic data


def rng_for(seed):
    """The package-wide generator: PCG64 seeded with ``seed``."""
    return np.random.Generator(np.random.PCG64(seed))


def planted_bump(h, w, amplitude):
    """Gaussian bump with peak ``amplitude`` centred on the grid."""
    rows = np.arange(h, dtype=np.float64) - (h - 1) / 2
    cols = np.arange(w, dtype=np.float64) - (w - 1) / 2
    sigma = max(h, w) / 4.0
    r2 = rows[:, None] ** 2 + cols[None, :] ** 2
    return amplitude * np.exp(-r2 / (2 * sigma * sigma))


def synth(n, h, w, kind="gaussian", seed=0, *, t_star=None, amplitude=10.0, duration=5,
          dtype=np.float64):
    """Generate a deterministic synthetic field sequence.

    Kinds:

    * ``"gaussian"``: i.i.d. standard normal values.
    * ``"smooth"``: a few Gaussian blobs drifting across the grid with
      slowly varying amplitude, plus weak noise.
    * ``"planted"``: i.i.d. standard normal noise with a bump of peak
      ``amplitude`` added to fields ``t_star .. t_star+duration-1``.

    Output depends only on the arguments (PCG64 stream, NumPy's ziggurat
    normals).
    """
    if min(n, h, w) < 1:
        raise ConfigError("n, h, w must all be >= 1")
    if kind not in SYNTH_KINDS:
        raise ConfigError(f"unknown synth kind {kind!r}; expected one of {SYNTH_KINDS}")
    rng = rng_for(seed)
    if kind == "gaussian":
        x = rng.standard_normal((n, h, w))
    elif kind == "planted":
        if duration < 1 or t_star is None or t_star < 0 or t_star + duration > n:
            raise ConfigError(f"t_star={t_star} with duration={duration} does not fit in n={n}")
        x = rng.standard_normal((n, h, w))
        x[t_star:t_star + duration] += planted_bump(h, w, amplitude)
    else:
        x = _smooth_advecting(rng, n, h, w)
    return FieldSequence(x.astype(dtype))


def _smooth_advecting(rng, n, h, w, blobs=3):
    t = np.arange(n, dtype=np.float64)[:, None, None]
    rows = np.arange(h, dtype=np.float64)[None, :, None]
    cols = np.arange(w, dtype=np.float64)[None, None, :]
    x = 0.1 * rng.standard_normal((n, h, w))
    for _ in range(blobs):
        r0, c0 = rng.uniform(0, h), rng.uniform(0, w)
        vr, vc = rng.uniform(-0.3, 0.3), rng.uniform(0.2, 1.0)
        width = rng.uniform(1.0, max(1.5, min(h, w) / 3))
        amp = rng.uniform(0.5, 2.0)
        period = rng.uniform(20, 200)
        rr = np.mod(r0 + vr * t, h)
        cc = np.mod(c0 + vc * t, w)
        # periodic grid distance
        dr = np.minimum(np.abs(rows - rr), h - np.abs(rows - rr))
        dc = np.minimum(np.abs(cols - cc), w - np.abs(cols - cc))
        x += amp * (1 + 0.5 * np.sin(2 * math.pi * t / period)) * np.exp(-(dr ** 2 + dc ** 2) / (2 * width ** 2))
    return x
