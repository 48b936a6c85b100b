"""Run configuration for one analysis pass.

Index convention
----------------
Every public interface in this package is 0-based. A trajectory starting
at field ``t`` (0-based) covers fields ``t .. t+d-1``; the ``m = n-d+1``
trajectories are indexed ``0 .. m-1``. In 1-based notation the same
trajectory is ``T_{t+1}`` and covers ``X_{t+1} .. X_{t+d}``.
"""

from __future__ import annotations

import os
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ConfigError, InfeasibleConfigError

DEFAULT_BATCH = 256
DEFAULT_D = 5
DEFAULT_K = 10
DEFAULT_K_VALUES = (1, 5, 10)

ENV_THREADS = "TRAKNN_THREADS"
ENV_MEMORY_BUDGET = "TRAKNN_MEMORY_BUDGET"


def _env_int(name):
    raw = os.environ.get(name)
    if raw is None or raw.strip() == "":
        return None
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"environment variable {name} must be an integer, got {raw!r}")


@dataclass(frozen=True)
class RunConfig:
    """Parameters governing one rarity pass.

    Parameters
    ----------
    d : int
        Trajectory duration in time steps.
    k : int
        Primary neighbor count.
    e : int, optional
        Exclusion-zone radius; candidates need ``|t - j| > e``. Defaults to ``d``.
    b : int
        Tile edge length of the spatial distance kernel.
    k_values : tuple of int
        Extra neighbor counts evaluated from the same pass. ``k`` is always included.
    storage : {"input", "float32", "float64"}
        Storage dtype of the spatial distance matrix. Accumulation is always 64-bit.
    refresh : int, optional
        Recompute every ``refresh``-th trajectory row by direct summation.
    seed : int, optional
        Generator seed, echoed in reports.
    threads : int, optional
        Worker cap for the tile kernel. Falls back to ``TRAKNN_THREADS`` then the CPU count.
    memory_budget : int, optional
        Byte cap for the spatial matrix. Falls back to ``TRAKNN_MEMORY_BUDGET``.
    """

    d: int = DEFAULT_D
    k: int = DEFAULT_K
    e: int | None = None
    b: int = DEFAULT_BATCH
    k_values: tuple = field(default=())
    storage: str = "input"
    refresh: int | None = None
    seed: int | None = None
    threads: int | None = None
    memory_budget: int | None = None

    def __post_init__(self):
        if self.e is None:
            object.__setattr__(self, "e", self.d)
        object.__setattr__(self, "k_values", tuple(sorted({int(v) for v in self.k_values} | {int(self.k)})))
        if self.d < 1:
            raise ConfigError(f"d must be >= 1, got {self.d}")
        if self.e < 0:
            raise ConfigError(f"e must be >= 0, got {self.e}")
        if min(self.k_values) < 1:
            raise ConfigError(f"k must be >= 1, got {min(self.k_values)}")
        if self.b < 1:
            raise ConfigError(f"b must be >= 1, got {self.b}")
        if self.storage not in ("input", "float32", "float64"):
            raise ConfigError(f"unknown storage dtype {self.storage!r}")
        if self.refresh is not None and self.refresh < 1:
            raise ConfigError(f"refresh must be >= 1 or disabled, got {self.refresh}")
        if self.threads is not None and self.threads < 1:
            raise ConfigError(f"threads must be >= 1, got {self.threads}")

    @property
    def k_max(self):
        return self.k_values[-1]

    def resolved_threads(self):
        if self.threads is not None:
            return self.threads
        env = _env_int(ENV_THREADS)
        if env is not None:
            if env < 1:
                raise ConfigError(f"{ENV_THREADS} must be >= 1")
            return env
        return os.cpu_count() or 1

    def resolved_budget(self):
        if self.memory_budget is not None:
            return self.memory_budget
        return _env_int(ENV_MEMORY_BUDGET)

    def storage_dtype(self, input_dtype):
        if self.storage == "input":
            return np.dtype(input_dtype)
        return np.dtype(self.storage)

    def n_trajectories(self, n):
        return n - self.d + 1

    def check(self, n):
        """Raise unless every trajectory of an ``n``-step sequence has ``k_max`` candidates."""
        if self.d > n:
            raise ConfigError(f"d={self.d} exceeds sequence length n={n}")
        m = self.n_trajectories(n)
        available = m - min(m, 2 * self.e + 1)
        if available < self.k_max:
            raise InfeasibleConfigError(available, self.k_max)

    def echo(self):
        out = asdict(self)
        out["k_values"] = list(self.k_values)
        out["threads"] = self.resolved_threads()
        out["memory_budget"] = self.resolved_budget()
        return out
