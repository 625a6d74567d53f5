"""
Motion mixer: turns a frame's tile scores into one velocity command.
"""

import logging
from dataclasses import dataclass

import numpy as np

from ..core.errors import ConfigurationError
from ..core.simkernel import STOP, MotionCommand
from ..middleware.correlation import ScoreGrid
from ..perception.slicer import TileColumn, TileRow

logger = logging.getLogger(__name__)

GATED_UTILITY = -1.0


@dataclass(frozen=True)
class MixerConfig:
    """Weights and gains of the motion mixer.

    Args:
        w_nav: Weight of FAR-row navigability
        w_fam: Weight of FAR-row familiarity (subtracted)
        std_floor: Tiles with a lower information score are distrusted
        forward_speed: Surge at unit center utility, m/s
        turn_gain: Yaw rate per unit of lateral preference, rad/s
    """

    w_nav: float = 1.0
    w_fam: float = 0.5
    std_floor: float = 0.02
    forward_speed: float = 0.5
    turn_gain: float = 1.5

    def __post_init__(self):
        problems = []
        if not self.w_nav > 0:
            problems.append(f"w_nav must be positive, got {self.w_nav}")
        if not self.w_fam > 0:
            problems.append(f"w_fam must be positive, got {self.w_fam}")
        if self.std_floor < 0:
            problems.append(f"std_floor must be non-negative, got {self.std_floor}")
        if not self.forward_speed > 0:
            problems.append(f"forward_speed must be positive, got {self.forward_speed}")
        if not self.turn_gain > 0:
            problems.append(f"turn_gain must be positive, got {self.turn_gain}")
        if problems:
            raise ConfigurationError("invalid mixer configuration", problems)


def column_utilities(scores: ScoreGrid, cfg: MixerConfig) -> np.ndarray:
    """Utilities u_L, u_C, u_R.

    FAR tiles set the direction; a column is gated to -1 when either of its
    tiles is featureless or its NEAR tile is not navigable.
    """
    far, near = int(TileRow.FAR), int(TileRow.NEAR)
    utilities = cfg.w_nav * scores.nav[far] - cfg.w_fam * scores.familiarity[far]
    gated = (scores.std.min(axis=0) < cfg.std_floor) | (scores.nav[near] <= 0.0)
    return np.where(gated, GATED_UTILITY, utilities)


def lateral_preference(utilities: np.ndarray) -> float:
    """u_R - u_L: positive means the right side is preferred."""
    return float(utilities[TileColumn.RIGHT] - utilities[TileColumn.LEFT])


def mix_motion(scores: ScoreGrid, cfg: MixerConfig) -> MotionCommand:
    """Forward speed from the center column, yaw from the left/right balance.

    A positive lateral preference turns the robot right, which is a negative
    (clockwise) yaw rate in the kernel's frame. When no column has positive
    utility the robot stops so that trap detection can take over.
    """
    utilities = column_utilities(scores, cfg)
    if np.all(utilities <= 0.0):
        return STOP
    surge = cfg.forward_speed * max(float(utilities[TileColumn.CENTER]), 0.0)
    yaw = -cfg.turn_gain * lateral_preference(utilities)
    return MotionCommand(surge=surge, yaw_rate=yaw)
