"""
Synthetic camera: one embedding and one information score per tile.

The scene embedder stands in for the visual encoder. A tile's embedding is a
mix of named prototype vectors weighted by what the ray fan sees (free floor,
obstacles, the target, nothing), plus a geometry component that makes
different places look different to the familiarity middleware.
"""

import csv
import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from ..core.errors import ConfigurationError
from ..core.worldmap import GridMap, Point, Pose, cast_fan, raycast
from ..language.embedding import EmbeddingProvider, normalize
from .slicer import TileLayout, TileSector, slice_fov

logger = logging.getLogger(__name__)

FAN_RAYS = 32
FAN_SAMPLES = 8
DEFAULT_NOISE_STD = 0.02
DEFAULT_TARGET_RADIUS = 0.25
DEFAULT_GEOMETRY_WEIGHT = 0.5
PROTOTYPE_SIMILARITY_LIMIT = 0.9
FRAME_CSV_HEADER = ["tile", "f_free", "f_obst", "v_target", "std"]

FLOOR_TEXT = "floor"
OBSTACLE_TEXT = "wall"
BLANK_TEXT = "blank"


@dataclass(frozen=True)
class TileObservation:
    embedding: np.ndarray
    std_dev: float
    tile_index: Tuple[int, int]
    label: str = ""
    f_free: float = 0.0
    f_obst: float = 0.0
    v_target: float = 0.0


@dataclass
class SceneEmbedder:
    """Prototype vectors and noise settings of the synthetic encoder.

    Args:
        e_floor: Prototype of visible free floor
        e_obstacle: Prototype of walls and furniture
        e_target: Prototype of the mission target
        e_blank: Prototype of empty view (beyond the map edge)
        noise_std: Scale of the unit-noise term
        geometry_weight: Weight of the depth-profile component per unit std
        target_radius: Physical radius of the target object in meters
        seed: Seed of the depth-profile projection
    """

    e_floor: np.ndarray
    e_obstacle: np.ndarray
    e_target: np.ndarray
    e_blank: np.ndarray
    noise_std: float = DEFAULT_NOISE_STD
    geometry_weight: float = DEFAULT_GEOMETRY_WEIGHT
    target_radius: float = DEFAULT_TARGET_RADIUS
    seed: int = 0
    projection: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        prototypes = {"floor": self.e_floor, "obstacle": self.e_obstacle,
                      "target": self.e_target, "blank": self.e_blank}
        dimension = self.e_floor.shape[0]
        problems = []
        for name, vector in prototypes.items():
            if vector.shape != (dimension,):
                problems.append(f"prototype {name} has shape {vector.shape}, expected ({dimension},)")
        if not problems:
            names = list(prototypes)
            for i, a in enumerate(names):
                for b in names[i + 1:]:
                    similarity = abs(float(np.dot(normalize(prototypes[a]), normalize(prototypes[b]))))
                    if similarity >= PROTOTYPE_SIMILARITY_LIMIT:
                        problems.append(f"prototypes {a} and {b} are too similar ({similarity:.3f})")
        if self.noise_std < 0:
            problems.append(f"noise_std must be non-negative, got {self.noise_std}")
        if self.geometry_weight < 0:
            problems.append(f"geometry_weight must be non-negative, got {self.geometry_weight}")
        if not self.target_radius > 0:
            problems.append(f"target_radius must be positive, got {self.target_radius}")
        if problems:
            raise ConfigurationError("invalid scene embedder", problems)
        for name in ("e_floor", "e_obstacle", "e_target", "e_blank"):
            setattr(self, name, normalize(getattr(self, name)))
        rng = np.random.default_rng(self.seed)
        self.projection = rng.standard_normal((dimension, FAN_RAYS)) / math.sqrt(FAN_RAYS)

    @property
    def dimension(self) -> int:
        return self.e_floor.shape[0]

    @classmethod
    def from_provider(cls, provider: EmbeddingProvider, target_description: str,
                      noise_std: float = DEFAULT_NOISE_STD, seed: int = 0, **kwargs) -> "SceneEmbedder":
        """Prototypes are the provider's encodings of short scene words."""
        return cls(provider.encode(FLOOR_TEXT), provider.encode(OBSTACLE_TEXT),
                   provider.encode(target_description), provider.encode(BLANK_TEXT),
                   noise_std=noise_std, seed=seed, **kwargs)

    def geometry_vector(self, ray_distances: np.ndarray) -> np.ndarray:
        spread = ray_distances.std()
        if spread < 1e-12:
            return np.zeros(self.dimension)
        return normalize(self.projection @ ((ray_distances - ray_distances.mean()) / spread))


def _target_weight(distance: float, span: float, target_radius: float) -> float:
    """Twice the angular share of the tile the target covers, capped at 1."""
    if distance < 1e-9:
        return 1.0
    angular = 2.0 * math.atan(target_radius / distance)
    return min(1.0, 2.0 * min(1.0, angular / span))


def target_visibility(grid: GridMap, target: Optional[Point], sector: TileSector,
                      target_radius: float = DEFAULT_TARGET_RADIUS) -> float:
    """Target weight when it sits inside the sector with clear line of sight, else 0."""
    if target is None:
        return 0.0
    origin = sector.origin
    distance = origin.distance_to(target)
    if not sector.inner_range <= distance <= sector.outer_range:
        return 0.0
    bearing = origin.bearing_to(target)
    if distance > 1e-9 and not sector.contains_bearing(bearing):
        return 0.0
    if distance > 1e-9 and raycast(grid, origin, bearing, distance) is not None:
        return 0.0
    return _target_weight(distance, sector.span, target_radius)


def observe_tile(grid: GridMap, target: Optional[Point], sector: TileSector, embedder: SceneEmbedder,
                 rng: Optional[np.random.Generator] = None) -> TileObservation:
    """Render one tile through a 32-ray, 8-sample fan.

    Every sample point is free floor when it lies before the ray's first
    hit, obstacle at or beyond it, and blank outside the map. The tile's
    information score is the dispersion of the sample depths (floor samples
    see their own range, the rest see the hit distance), scaled into [0, 1].
    A flat wall filling the tile gives a near-constant depth and a score
    close to zero.
    """
    headings = sector.ray_headings(FAN_RAYS)
    radii = sector.radial_samples(FAN_SAMPLES)
    ox, oy = sector.origin.position
    hits = cast_fan(grid, (ox, oy), headings, sector.outer_range)

    px = ox + np.cos(headings)[:, None] * radii[None, :]
    py = oy + np.sin(headings)[:, None] * radii[None, :]
    x0, y0, x1, y1 = grid.bounds
    inside = (px >= x0) & (px <= x1) & (py >= y0) & (py <= y1)
    before = radii[None, :] < hits[:, None]
    total = float(inside.size)
    f_free = float((inside & before).sum()) / total
    f_obst = float((inside & ~before).sum()) / total
    f_blank = 1.0 - f_free - f_obst

    depth = np.minimum(radii[None, :], hits[:, None])
    std_dev = min(1.0, 2.0 * float(depth.std()) / (sector.outer_range - sector.inner_range))

    v_target = target_visibility(grid, target, sector, embedder.target_radius)
    scene = 1.0 - v_target
    geometry = embedder.geometry_weight * std_dev * embedder.geometry_vector(hits)
    mix = (scene * (f_free * embedder.e_floor + f_obst * embedder.e_obstacle + f_blank * embedder.e_blank + geometry)
           + v_target * embedder.e_target)
    if embedder.noise_std > 0.0 and rng is not None:
        mix = mix + embedder.noise_std * normalize(rng.standard_normal(embedder.dimension))
    embedding = normalize(mix)
    if not np.any(embedding):
        embedding = embedder.e_blank

    return TileObservation(embedding, std_dev, sector.index, sector.label, f_free, f_obst, v_target)


def observe_frame(grid: GridMap, target: Optional[Point], pose: Pose, layout: TileLayout,
                  embedder: SceneEmbedder, rng: Optional[np.random.Generator] = None) -> List[TileObservation]:
    return [observe_tile(grid, target, sector, embedder, rng) for sector in slice_fov(layout, pose)]


def frame_rows(observations: Sequence[TileObservation]) -> List[List[str]]:
    return [[obs.label, f"{obs.f_free:.6f}", f"{obs.f_obst:.6f}", f"{obs.v_target:.6f}", f"{obs.std_dev:.6f}"]
            for obs in observations]


def write_frame_csv(observations: Sequence[TileObservation], path: str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(FRAME_CSV_HEADER)
        writer.writerows(frame_rows(observations))
