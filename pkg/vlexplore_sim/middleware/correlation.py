"""
Vision-language correlation: navigability and target confidence per tile.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from ..core.errors import ConfigurationError, DimensionMismatchError
from ..language.promptdb import EncodedPromptDB
from ..perception.scene import TileObservation
from .familiarity import FamiliarityDB

logger = logging.getLogger(__name__)

GRID_SHAPE = (2, 3)


def correlate(embedding: np.ndarray, db: EncodedPromptDB) -> float:
    """Contrast score of an embedding against a polarity-labeled prompt DB.

    The best positive and best negative inner products compete; the winner's
    magnitude is returned, negated when the negative class wins. An empty
    class scores -1.
    """
    embedding = np.asarray(embedding, dtype=float)
    if embedding.shape != (db.dimension,):
        raise DimensionMismatchError(f"embedding has shape {embedding.shape}, prompt DB expects ({db.dimension},)")
    s_pos = float(np.max(db.positive_matrix @ embedding)) if len(db.positive_matrix) else -1.0
    s_neg = float(np.max(db.negative_matrix @ embedding)) if len(db.negative_matrix) else -1.0
    score = s_pos if s_pos >= s_neg else -s_neg
    return min(max(score, -1.0), 1.0)


@dataclass
class ScoreGrid:
    """Per-tile scores, rows NEAR/FAR and columns L/C/R."""

    nav: np.ndarray
    target: np.ndarray
    familiarity: np.ndarray
    std: np.ndarray

    def __post_init__(self):
        for name in ("nav", "target", "familiarity", "std"):
            value = np.asarray(getattr(self, name), dtype=float)
            if value.shape != GRID_SHAPE:
                raise ConfigurationError(f"ScoreGrid.{name} must have shape {GRID_SHAPE}, got {value.shape}")
            setattr(self, name, value)

    @classmethod
    def uniform(cls, nav: float = 0.0, target: float = 0.0, familiarity: float = 0.0,
                std: float = 1.0) -> "ScoreGrid":
        return cls(np.full(GRID_SHAPE, nav), np.full(GRID_SHAPE, target),
                   np.full(GRID_SHAPE, familiarity), np.full(GRID_SHAPE, std))

    @property
    def target_max(self) -> float:
        return float(self.target.max())

    @property
    def target_argmax(self) -> Tuple[int, int]:
        row, col = np.unravel_index(int(np.argmax(self.target)), GRID_SHAPE)
        return int(row), int(col)


def score_frame(observations: Sequence[TileObservation], nav_db: EncodedPromptDB, target_db: EncodedPromptDB,
                fam_db: Optional[FamiliarityDB], fixed_familiarity: Optional[float] = None) -> ScoreGrid:
    """Score six tiles in canonical order.

    Familiarity is queried and updated tile by tile, so a tile can already
    match a spot stored by an earlier tile of the same frame. With
    ``fixed_familiarity`` set, or without a DB, the familiarity middleware is
    bypassed and the DB is left untouched.
    """
    if len(observations) != GRID_SHAPE[0] * GRID_SHAPE[1]:
        raise ConfigurationError(f"expected 6 tile observations, got {len(observations)}")
    nav = np.zeros(GRID_SHAPE)
    target = np.zeros(GRID_SHAPE)
    familiarity = np.zeros(GRID_SHAPE)
    std = np.zeros(GRID_SHAPE)
    for obs in observations:
        row, col = obs.tile_index
        nav[row, col] = correlate(obs.embedding, nav_db)
        target[row, col] = correlate(obs.embedding, target_db)
        if fixed_familiarity is not None:
            familiarity[row, col] = fixed_familiarity
        elif fam_db is not None:
            familiarity[row, col] = fam_db.query_update(obs.embedding)
        std[row, col] = obs.std_dev
    return ScoreGrid(nav, target, familiarity, std)
