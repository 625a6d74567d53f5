"""
Occupancy grid world.

This module provides the closed-world grid map every policy runs on, map file
I/O (binary PGM raster plus a ``.meta`` sidecar), footprint collision tests
and exact grid ray casting.

World frame: x right, y up, heading 0 along +x, counter-clockwise positive.
Cell ``(ix, iy)`` covers ``[ox + ix*res, ox + (ix+1)*res) x [oy + iy*res, ...)``
and is stored at ``occupied[iy, ix]``; raster row 0 is the top (max-y) row.
"""

import logging
import math
import os
from dataclasses import dataclass
from functools import cached_property
from typing import Dict, Optional, Sequence, Tuple, Union

import numpy as np
from PIL import Image
from scipy import ndimage

from .errors import CollisionError, ConfigurationError, MapLoadError

logger = logging.getLogger(__name__)

DEFAULT_RESOLUTION = 0.05
DEFAULT_OCCUPIED_BELOW = 128
FREE_PIXEL = 255
OCCUPIED_PIXEL = 0

Point = Tuple[float, float]


def wrap_angle(angle: float) -> float:
    """Normalize an angle into [-pi, pi)."""
    wrapped = (angle + math.pi) % (2.0 * math.pi) - math.pi
    if wrapped >= math.pi:
        wrapped -= 2.0 * math.pi
    return wrapped


@dataclass(frozen=True)
class Pose:
    """Planar robot pose; heading is kept normalized."""

    x: float
    y: float
    heading: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))
        object.__setattr__(self, "heading", wrap_angle(float(self.heading)))

    @property
    def position(self) -> Point:
        return (self.x, self.y)

    def distance_to(self, point: Point) -> float:
        return math.hypot(point[0] - self.x, point[1] - self.y)

    def bearing_to(self, point: Point) -> float:
        return math.atan2(point[1] - self.y, point[0] - self.x)


@dataclass(frozen=True)
class RayHit:
    """First obstacle contact along a ray."""

    distance: float
    normal: Tuple[float, float]


def _xy(point: Union[Pose, Sequence[float]]) -> Point:
    if isinstance(point, Pose):
        return point.x, point.y
    return float(point[0]), float(point[1])


@dataclass(frozen=True, eq=False)
class GridMap:
    """Immutable binary occupancy grid.

    Args:
        occupied: Boolean array of shape (height, width), row 0 at min y
        resolution: Meters per cell
        origin: World coordinate of the lower-left corner of cell (0, 0)
    """

    occupied: np.ndarray
    resolution: float = DEFAULT_RESOLUTION
    origin: Tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        cells = np.array(self.occupied, dtype=bool, copy=True)
        if cells.ndim != 2 or cells.shape[0] < 1 or cells.shape[1] < 1:
            raise ConfigurationError(f"grid must be a non-empty 2D array, got shape {cells.shape}")
        if not self.resolution > 0:
            raise ConfigurationError(f"resolution must be positive, got {self.resolution}")
        cells.setflags(write=False)
        object.__setattr__(self, "occupied", cells)
        object.__setattr__(self, "resolution", float(self.resolution))
        object.__setattr__(self, "origin", (float(self.origin[0]), float(self.origin[1])))

    @property
    def width(self) -> int:
        return int(self.occupied.shape[1])

    @property
    def height(self) -> int:
        return int(self.occupied.shape[0])

    @property
    def bounds(self) -> Tuple[float, float, float, float]:
        """(xmin, ymin, xmax, ymax) in meters."""
        ox, oy = self.origin
        return ox, oy, ox + self.width * self.resolution, oy + self.height * self.resolution

    @property
    def diagonal(self) -> float:
        return math.hypot(self.width * self.resolution, self.height * self.resolution)

    def contains(self, x: float, y: float) -> bool:
        xmin, ymin, xmax, ymax = self.bounds
        return xmin <= x <= xmax and ymin <= y <= ymax

    def world_to_cell(self, x: float, y: float) -> Tuple[int, int]:
        """Cell index of a world point; points on the far edge map to the last cell."""
        ix = int(math.floor((x - self.origin[0]) / self.resolution))
        iy = int(math.floor((y - self.origin[1]) / self.resolution))
        if self.contains(x, y):
            ix = min(max(ix, 0), self.width - 1)
            iy = min(max(iy, 0), self.height - 1)
        return ix, iy

    def cell_center(self, ix: int, iy: int) -> Point:
        return (self.origin[0] + (ix + 0.5) * self.resolution,
                self.origin[1] + (iy + 0.5) * self.resolution)

    def in_grid(self, ix: int, iy: int) -> bool:
        return 0 <= ix < self.width and 0 <= iy < self.height

    def is_occupied_cell(self, ix: int, iy: int) -> bool:
        """Occupancy of a cell; everything outside the grid is occupied."""
        if not self.in_grid(ix, iy):
            return True
        return bool(self.occupied[iy, ix])

    def is_free_point(self, x: float, y: float) -> bool:
        if not self.contains(x, y):
            return False
        return not self.is_occupied_cell(*self.world_to_cell(x, y))

    @property
    def free_count(self) -> int:
        return int(self.occupied.size - np.count_nonzero(self.occupied))

    @property
    def occupied_count(self) -> int:
        return int(np.count_nonzero(self.occupied))

    @cached_property
    def _nearest_obstacle_index(self) -> np.ndarray:
        # Pad with occupied cells so the map border counts as an obstacle
        free = np.pad(~self.occupied, 1, constant_values=False)
        _, indices = ndimage.distance_transform_edt(free, return_indices=True)
        return indices

    def nearest_obstacle(self, x: float, y: float) -> Tuple[float, float]:
        """Distance and bearing from a point to the closest occupied cell.

        The candidate cell comes from a Euclidean distance transform over cell
        centers; distance and bearing are then measured to the closest point
        of that cell's square.

        Returns:
            tuple: (distance in meters, bearing in radians)
        """
        ix, iy = self.world_to_cell(x, y)
        indices = self._nearest_obstacle_index
        jy = int(indices[0, iy + 1, ix + 1]) - 1
        jx = int(indices[1, iy + 1, ix + 1]) - 1
        res = self.resolution
        x0 = self.origin[0] + jx * res
        y0 = self.origin[1] + jy * res
        cx = min(max(x, x0), x0 + res)
        cy = min(max(y, y0), y0 + res)
        dx, dy = cx - x, cy - y
        distance = math.hypot(dx, dy)
        if distance < 1e-12:
            center = self.cell_center(jx, jy)
            return 0.0, math.atan2(center[1] - y, center[0] - x)
        return distance, math.atan2(dy, dx)


def _sidecar_path(path: str) -> str:
    return os.path.splitext(path)[0] + ".meta"


def _read_pgm_header(data: bytes) -> Tuple[int, int, int, int]:
    """Validate a binary PGM header.

    Returns:
        tuple: (width, height, maxval, raster offset)
    """
    if data[:2] != b"P5":
        raise MapLoadError("magic", f"expected 'P5', found {data[:2]!r}")

    fields = ("width", "height", "maxval")
    values = []
    pos = 2
    for field in fields:
        # Skip whitespace and comments between tokens
        while pos < len(data):
            char = data[pos:pos + 1]
            if char.isspace():
                pos += 1
            elif char == b"#":
                while pos < len(data) and data[pos:pos + 1] not in (b"\n", b"\r"):
                    pos += 1
            else:
                break
        start = pos
        while pos < len(data) and data[pos:pos + 1].isdigit():
            pos += 1
        token = data[start:pos]
        if not token:
            raise MapLoadError(field, "missing or non-numeric value")
        values.append(int(token))
    if pos >= len(data) or not data[pos:pos + 1].isspace():
        raise MapLoadError("maxval", "header must end with a single whitespace byte")
    pos += 1

    width, height, maxval = values
    if width < 1:
        raise MapLoadError("width", f"must be at least 1, got {width}")
    if height < 1:
        raise MapLoadError("height", f"must be at least 1, got {height}")
    if not 1 <= maxval <= 255:
        raise MapLoadError("maxval", f"only 8-bit rasters are supported, got {maxval}")
    return width, height, maxval, pos


def _read_meta(path: str) -> Dict[str, float]:
    meta_path = _sidecar_path(path)
    if not os.path.exists(meta_path):
        raise MapLoadError("sidecar", f"missing metadata file {meta_path}")

    meta: Dict[str, float] = {
        "resolution": DEFAULT_RESOLUTION,
        "origin_x": 0.0,
        "origin_y": 0.0,
        "occupied_below": float(DEFAULT_OCCUPIED_BELOW),
    }
    seen = set()
    with open(meta_path, "r", encoding="utf-8") as handle:
        for line_no, raw in enumerate(handle, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise MapLoadError(parts[0], f"expected 'key value' on line {line_no}")
            key, value = parts
            if key not in meta:
                logger.warning(f"Ignoring unknown map metadata key '{key}' in {meta_path}")
                continue
            try:
                meta[key] = float(value)
            except ValueError:
                raise MapLoadError(key, f"not a number: {value!r}")
            seen.add(key)

    if "resolution" not in seen:
        logger.warning(f"No resolution in {meta_path}; using {DEFAULT_RESOLUTION} m/cell")
    if not meta["resolution"] > 0:
        raise MapLoadError("resolution", f"must be positive, got {meta['resolution']}")
    if not 0 <= meta["occupied_below"] <= 256:
        raise MapLoadError("occupied_below", f"must lie in 0..256, got {meta['occupied_below']}")
    return meta


def load_map(path: str) -> GridMap:
    """Load a map from a binary PGM raster and its ``.meta`` sidecar.

    Args:
        path: Path to the ``.pgm`` file

    Returns:
        GridMap: Pixels darker than ``occupied_below`` become occupied

    Raises:
        MapLoadError: Naming the offending header field, the raster size or
            the sidecar
    """
    if not os.path.exists(path):
        raise MapLoadError("path", f"map file not found: {path}")
    with open(path, "rb") as handle:
        data = handle.read()

    width, height, maxval, offset = _read_pgm_header(data)
    available = len(data) - offset
    if available < width * height:
        raise MapLoadError("raster", f"expected {width * height} pixels for {width}x{height}, found {available}")
    meta = _read_meta(path)

    with Image.open(path) as image:
        pixels = np.asarray(image.convert("L"), dtype=np.uint8)
    if pixels.shape != (height, width):
        raise MapLoadError("raster", f"decoded size {pixels.shape[::-1]} does not match header {width}x{height}")
    if maxval != 255:
        logger.warning(f"Raster maxval is {maxval}; thresholding decoded pixel values")

    occupied = np.flipud(pixels < meta["occupied_below"])
    grid = GridMap(occupied, meta["resolution"], (meta["origin_x"], meta["origin_y"]))
    logger.info(f"Loaded map {path}: {width}x{height} cells at {grid.resolution} m/cell, "
                f"{grid.occupied_count} occupied")
    return grid


def save_map(grid: GridMap, path: str, occupied_below: int = DEFAULT_OCCUPIED_BELOW) -> None:
    """Write a map as a binary PGM raster plus ``.meta`` sidecar."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    pixels = np.where(np.flipud(grid.occupied), OCCUPIED_PIXEL, FREE_PIXEL).astype(np.uint8)
    Image.fromarray(pixels).save(path, format="PPM")
    with open(_sidecar_path(path), "w", encoding="utf-8") as handle:
        handle.write(f"resolution {grid.resolution!r}\n")
        handle.write(f"origin_x {grid.origin[0]!r}\n")
        handle.write(f"origin_y {grid.origin[1]!r}\n")
        handle.write(f"occupied_below {occupied_below}\n")


def is_free_disk(grid: GridMap, center: Union[Pose, Sequence[float]], radius: float) -> bool:
    """True iff every cell intersecting the disk is free and the disk is inside the map."""
    if radius < 0:
        raise ConfigurationError(f"radius must be non-negative, got {radius}")
    x, y = _xy(center)
    xmin, ymin, xmax, ymax = grid.bounds
    if x - radius < xmin or x + radius > xmax or y - radius < ymin or y + radius > ymax:
        return False
    if grid.is_occupied_cell(*grid.world_to_cell(x, y)):
        return False
    if radius == 0:
        return True

    res = grid.resolution
    ox, oy = grid.origin
    ix0 = max(int(math.floor((x - radius - ox) / res)), 0)
    ix1 = min(int(math.floor((x + radius - ox) / res)), grid.width - 1)
    iy0 = max(int(math.floor((y - radius - oy) / res)), 0)
    iy1 = min(int(math.floor((y + radius - oy) / res)), grid.height - 1)
    window = grid.occupied[iy0:iy1 + 1, ix0:ix1 + 1]
    if not window.any():
        return True

    left = ox + np.arange(ix0, ix1 + 1) * res
    bottom = oy + np.arange(iy0, iy1 + 1) * res
    dx = np.maximum(np.maximum(left - x, 0.0), x - (left + res))
    dy = np.maximum(np.maximum(bottom - y, 0.0), y - (bottom + res))
    dist2 = dy[:, None] ** 2 + dx[None, :] ** 2
    # Tangent contact does not count as intersection
    return not bool(np.any(window & (dist2 < radius * radius - 1e-12)))


def raycast(grid: GridMap, origin: Union[Pose, Sequence[float]], heading: float,
            max_range: float) -> Optional[RayHit]:
    """Cast a ray by exact cell-by-cell traversal.

    Args:
        grid: The map
        origin: Start point, must lie in a free cell inside the map
        heading: Ray direction in radians
        max_range: Maximum distance to search

    Returns:
        RayHit or None: Distance to the first occupied cell face and the
        outward normal of that face, or None if nothing is hit within range

    Raises:
        CollisionError: If the origin is outside the map or inside an obstacle
    """
    x, y = _xy(origin)
    if not grid.contains(x, y):
        raise CollisionError(f"ray origin ({x:.3f}, {y:.3f}) is outside the map")
    ix, iy = grid.world_to_cell(x, y)
    if grid.is_occupied_cell(ix, iy):
        raise CollisionError(f"ray origin ({x:.3f}, {y:.3f}) is inside an occupied cell")

    dx, dy = math.cos(heading), math.sin(heading)
    if abs(dx) < 1e-12:
        dx = 0.0
    if abs(dy) < 1e-12:
        dy = 0.0
    res = grid.resolution
    ox, oy = grid.origin

    if dx > 0:
        step_x, t_max_x, t_delta_x = 1, (ox + (ix + 1) * res - x) / dx, res / dx
    elif dx < 0:
        step_x, t_max_x, t_delta_x = -1, (ox + ix * res - x) / dx, -res / dx
    else:
        step_x, t_max_x, t_delta_x = 0, math.inf, math.inf
    if dy > 0:
        step_y, t_max_y, t_delta_y = 1, (oy + (iy + 1) * res - y) / dy, res / dy
    elif dy < 0:
        step_y, t_max_y, t_delta_y = -1, (oy + iy * res - y) / dy, -res / dy
    else:
        step_y, t_max_y, t_delta_y = 0, math.inf, math.inf

    while True:
        if t_max_x <= t_max_y:
            t = t_max_x
            ix += step_x
            normal = (float(-step_x), 0.0)
            t_max_x += t_delta_x
        else:
            t = t_max_y
            iy += step_y
            normal = (0.0, float(-step_y))
            t_max_y += t_delta_y
        if t > max_range:
            return None
        if grid.is_occupied_cell(ix, iy):
            return RayHit(max(t, 0.0), normal)


def cast_fan(grid: GridMap, origin: Union[Pose, Sequence[float]], headings: np.ndarray,
             max_range: float, step: Optional[float] = None) -> np.ndarray:
    """Approximate hit distances for many rays at once by dense sampling.

    Used by the synthetic camera where batches of rays matter more than exact
    contact geometry. Distances are accurate to ``step`` (default a quarter
    cell) and capped at ``max_range``.
    """
    x, y = _xy(origin)
    step = step or grid.resolution / 4.0
    headings = np.asarray(headings, dtype=float)
    count = max(int(math.ceil(max_range / step)), 1)
    radii = np.arange(1, count + 1) * step
    px = x + np.cos(headings)[:, None] * radii[None, :]
    py = y + np.sin(headings)[:, None] * radii[None, :]
    ix = np.floor((px - grid.origin[0]) / grid.resolution).astype(int)
    iy = np.floor((py - grid.origin[1]) / grid.resolution).astype(int)
    inside = (ix >= 0) & (ix < grid.width) & (iy >= 0) & (iy < grid.height)
    blocked = ~inside
    blocked[inside] = grid.occupied[iy[inside], ix[inside]]
    first = np.argmax(blocked, axis=1)
    distances = np.where(blocked.any(axis=1), radii[first] - 0.5 * step, max_range)
    return np.minimum(distances, max_range)
