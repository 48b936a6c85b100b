"""Exact k-nearest-neighbor rarity scores for trajectories of gridded fields."""

__version__ = "0.1.0"

from .config import RunConfig  # noqa: E402
from .errors import (  # noqa: E402
    ConfigError,
    FormatError,
    InfeasibleConfigError,
    MemoryBudgetError,
    TraknnError,
)
from .field_store import FieldSequence, GridWeights, load, save, synth  # noqa: E402
from .pipeline import score_sequence  # noqa: E402
from .rarity import RarityReport, RarityResult, rarity_scores, top_rare  # noqa: E402
from .spatial import SpatialDistanceMatrix, spatial_distance_matrix  # noqa: E402

__all__ = [
    "ConfigError",
    "FieldSequence",
    "FormatError",
    "GridWeights",
    "InfeasibleConfigError",
    "MemoryBudgetError",
    "RarityReport",
    "RarityResult",
    "RunConfig",
    "SpatialDistanceMatrix",
    "TraknnError",
    "load",
    "rarity_scores",
    "save",
    "score_sequence",
    "spatial_distance_matrix",
    "synth",
    "top_rare",
]
