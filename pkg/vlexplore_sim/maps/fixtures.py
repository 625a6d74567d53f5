"""
Synthetic map builders used by tests, examples and the bundled experiments.
"""

import math
from typing import Dict, Optional, Tuple

import numpy as np

from ..core.worldmap import DEFAULT_RESOLUTION, GridMap, Point


def _blank(width_m: float, height_m: float, resolution: float) -> np.ndarray:
    width = int(round(width_m / resolution))
    height = int(round(height_m / resolution))
    return np.zeros((height, width), dtype=bool)


def fill_rect(cells: np.ndarray, resolution: float, x0: float, y0: float, x1: float, y1: float,
              value: bool = True) -> None:
    """Mark every cell whose center lies inside the world rectangle."""
    height, width = cells.shape
    xs = (np.arange(width) + 0.5) * resolution
    ys = (np.arange(height) + 0.5) * resolution
    cols = (xs >= x0) & (xs <= x1)
    rows = (ys >= y0) & (ys <= y1)
    cells[np.ix_(rows, cols)] = value


def empty_map(width_m: float = 10.0, height_m: float = 10.0,
              resolution: float = DEFAULT_RESOLUTION) -> GridMap:
    return GridMap(_blank(width_m, height_m, resolution), resolution)


def corridor_map(length_m: float = 10.0, width_m: float = 2.0, wall_m: Optional[float] = None,
                 resolution: float = DEFAULT_RESOLUTION) -> GridMap:
    """Straight corridor along +x, surrounded by solid walls.

    The free lane spans ``[wall, wall + length] x [wall, wall + width]``.
    """
    wall = resolution if wall_m is None else wall_m
    cells = np.ones((int(round((width_m + 2 * wall) / resolution)),
                     int(round((length_m + 2 * wall) / resolution))), dtype=bool)
    fill_rect(cells, resolution, wall, wall, wall + length_m, wall + width_m, value=False)
    return GridMap(cells, resolution)


def lane_map(length_cells: int, resolution: float = 1.0) -> GridMap:
    """One-cell-wide lane of ``length_cells`` free cells inside a 3-row block."""
    cells = np.ones((3, length_cells + 2), dtype=bool)
    cells[1, 1:length_cells + 1] = False
    return GridMap(cells, resolution)


def square_obstacle_map(size_m: float = 20.0, obstacle_m: float = 2.0,
                        center: Optional[Point] = None,
                        resolution: float = DEFAULT_RESOLUTION) -> GridMap:
    cells = _blank(size_m, size_m, resolution)
    cx, cy = center if center is not None else (size_m / 2.0, size_m / 2.0)
    half = obstacle_m / 2.0
    fill_rect(cells, resolution, cx - half, cy - half, cx + half, cy + half)
    return GridMap(cells, resolution)


def c_trap_map(size_m: float = 12.0, resolution: float = DEFAULT_RESOLUTION) -> GridMap:
    """Cul-de-sac whose mouth faces -x; the back wall sits at x = 7.

    A robot driving from the west toward a target east of the trap enters the
    cavity and meets the back wall head-on.
    """
    cells = _blank(size_m, size_m, resolution)
    mid = size_m / 2.0
    thickness = 0.3
    depth = 3.0
    half_width = 1.5
    back = 7.0
    fill_rect(cells, resolution, back, mid - half_width - thickness, back + thickness, mid + half_width + thickness)
    fill_rect(cells, resolution, back - depth, mid + half_width, back + thickness, mid + half_width + thickness)
    fill_rect(cells, resolution, back - depth, mid - half_width - thickness, back + thickness, mid - half_width)
    return GridMap(cells, resolution)


def doorway_ring_map(size_m: float = 12.0, ring_radius: float = 1.5, thickness: float = 0.2,
                     door_center: float = math.pi / 2.0, door_width: float = math.radians(60.0),
                     resolution: float = DEFAULT_RESOLUTION) -> GridMap:
    """Circular wall around the map center with one angular opening."""
    cells = _blank(size_m, size_m, resolution)
    height, width = cells.shape
    xs = (np.arange(width) + 0.5) * resolution - size_m / 2.0
    ys = (np.arange(height) + 0.5) * resolution - size_m / 2.0
    gx, gy = np.meshgrid(xs, ys)
    radius = np.hypot(gx, gy)
    angle = np.arctan2(gy, gx)
    offset = np.abs((angle - door_center + math.pi) % (2 * math.pi) - math.pi)
    ring = (radius >= ring_radius) & (radius <= ring_radius + thickness)
    cells[ring & (offset > door_width / 2.0)] = True
    return GridMap(cells, resolution)


def sealed_cell_map(size_m: float = 6.0, cell_m: float = 1.0, thickness: float = 0.2,
                    resolution: float = DEFAULT_RESOLUTION) -> GridMap:
    """Closed square room of ``cell_m`` inner side at the map center."""
    cells = _blank(size_m, size_m, resolution)
    c = size_m / 2.0
    h = cell_m / 2.0
    fill_rect(cells, resolution, c - h - thickness, c - h - thickness, c + h + thickness, c + h + thickness)
    fill_rect(cells, resolution, c - h, c - h, c + h, c + h, value=False)
    return GridMap(cells, resolution)


OFFICE_WAYPOINTS: Dict[str, Point] = {
    "C": (6.0, 5.0),
    "NW": (1.2, 8.8),
    "NE": (10.8, 8.8),
    "SW": (1.2, 1.2),
    "SE": (10.8, 1.2),
}


def office_map(resolution: float = DEFAULT_RESOLUTION) -> Tuple[GridMap, Dict[str, Point]]:
    """12 x 10 m desk-scale office with desks, a cabinet and a partition wall.

    Returns:
        tuple: (map, named waypoints C/NW/NE/SW/SE)
    """
    cells = _blank(12.0, 10.0, resolution)
    # desks
    fill_rect(cells, resolution, 2.5, 6.5, 4.5, 7.5)
    fill_rect(cells, resolution, 7.5, 2.5, 9.5, 3.5)
    # cabinet
    fill_rect(cells, resolution, 8.0, 6.8, 8.6, 8.6)
    # partition with a gap at the center line
    fill_rect(cells, resolution, 3.0, 2.0, 3.2, 4.2)
    fill_rect(cells, resolution, 5.0, 0.0, 5.2, 1.8)
    return GridMap(cells, resolution), dict(OFFICE_WAYPOINTS)


BUILTIN_MAPS = {
    "empty": empty_map,
    "corridor": corridor_map,
    "square": square_obstacle_map,
    "c-trap": c_trap_map,
    "doorway": doorway_ring_map,
    "sealed": sealed_cell_map,
    "office": lambda resolution=DEFAULT_RESOLUTION: office_map(resolution)[0],
}
