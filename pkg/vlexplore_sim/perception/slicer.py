"""
2 x 3 field-of-view slicing.

Columns split the field of view into angular thirds, rows split the view
range into a NEAR and a FAR band. Interior edges are widened so neighbouring
tiles overlap, the way the image slicer shares pixels between tiles.
"""

import math
from dataclasses import dataclass
from enum import IntEnum
from typing import Tuple

import numpy as np

from ..core.errors import ConfigurationError
from ..core.worldmap import Pose, wrap_angle

DEFAULT_FOV = math.pi / 2.0
DEFAULT_OVERLAP = 0.2
DEFAULT_NEAR_RANGE = 1.0
DEFAULT_FAR_RANGE = 5.0


class TileRow(IntEnum):
    NEAR = 0
    FAR = 1


class TileColumn(IntEnum):
    LEFT = 0
    CENTER = 1
    RIGHT = 2

    @property
    def letter(self) -> str:
        return self.name[0]


@dataclass(frozen=True)
class TileLayout:
    fov: float = DEFAULT_FOV
    overlap_fraction: float = DEFAULT_OVERLAP
    near_range: float = DEFAULT_NEAR_RANGE
    far_range: float = DEFAULT_FAR_RANGE
    rows: int = 2
    cols: int = 3

    def __post_init__(self):
        problems = []
        if not 0 < self.fov < 2 * math.pi:
            problems.append(f"fov must lie in (0, 2 pi), got {self.fov}")
        if not 0 <= self.overlap_fraction < 0.5:
            problems.append(f"overlap_fraction must lie in [0, 0.5), got {self.overlap_fraction}")
        if not 0 < self.near_range < self.far_range:
            problems.append(f"need 0 < near_range < far_range, got {self.near_range}, {self.far_range}")
        if (self.rows, self.cols) != (2, 3):
            problems.append("only the 2 x 3 tile layout is supported")
        if problems:
            raise ConfigurationError("invalid tile layout", problems)

    @property
    def tile_width(self) -> float:
        return self.fov / self.cols

    def column_span(self, col: TileColumn) -> Tuple[float, float]:
        """Body-frame (start, end) angles of a column, CCW positive, left is +."""
        third = self.tile_width
        grow = self.overlap_fraction * third / 2.0
        edges = {
            TileColumn.LEFT: (self.fov / 6.0 - grow, self.fov / 2.0),
            TileColumn.CENTER: (-self.fov / 6.0 - grow, self.fov / 6.0 + grow),
            TileColumn.RIGHT: (-self.fov / 2.0, -self.fov / 6.0 + grow),
        }
        return edges[col]

    def row_span(self, row: TileRow) -> Tuple[float, float]:
        if row is TileRow.NEAR:
            return 0.0, self.near_range
        return self.near_range * (1.0 - self.overlap_fraction), self.far_range


@dataclass(frozen=True)
class TileSector:
    """Annular sector in world coordinates; angles run CCW from start to end."""

    row: TileRow
    col: TileColumn
    origin: Pose
    start_angle: float
    end_angle: float
    inner_range: float
    outer_range: float

    @property
    def index(self) -> Tuple[int, int]:
        return int(self.row), int(self.col)

    @property
    def label(self) -> str:
        return f"{self.row.name}_{self.col.letter}"

    @property
    def span(self) -> float:
        return self.end_angle - self.start_angle

    @property
    def bisector(self) -> float:
        return wrap_angle(self.start_angle + self.span / 2.0)

    def ray_headings(self, count: int) -> np.ndarray:
        """``count`` evenly spread ray directions, centered in equal sub-arcs."""
        return self.start_angle + (np.arange(count) + 0.5) / count * self.span

    def radial_samples(self, count: int) -> np.ndarray:
        return self.inner_range + (np.arange(count) + 0.5) / count * (self.outer_range - self.inner_range)

    def contains_bearing(self, bearing: float) -> bool:
        offset = (bearing - self.start_angle) % (2 * math.pi)
        return offset <= self.span


def slice_fov(layout: TileLayout, pose: Pose) -> Tuple[TileSector, ...]:
    """The six sectors in canonical order NEAR L/C/R then FAR L/C/R."""
    sectors = []
    for row in TileRow:
        inner, outer = layout.row_span(row)
        for col in TileColumn:
            start, end = layout.column_span(col)
            sectors.append(TileSector(row, col, pose, pose.heading + start, pose.heading + end, inner, outer))
    return tuple(sectors)
