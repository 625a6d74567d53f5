"""
Map Registry and Cache Management.

This module provides a thread-safe registry for loaded occupancy maps so a
map is parsed once and shared by every trial that runs on it.
"""

import logging
import threading
import time
import uuid
from typing import Any, Dict, List, Optional

from .worldmap import GridMap

logger = logging.getLogger(__name__)

MAX_CACHE_SIZE = 10
CACHE_MAINTENANCE_INTERVAL = 300  # 5 minutes


class MapRegistry:
    """Thread-safe registry for loaded grid maps.

    This registry:
    1. Maintains a map of map_id → GridMap
    2. Tracks the source path (or builtin name) of each map
    3. Implements LRU eviction with access times
    """

    def __init__(self, max_cache_size: int = MAX_CACHE_SIZE):
        """Initialize the registry with the given cache size.

        Args:
            max_cache_size: Maximum number of maps to keep in memory
        """
        self._maps: Dict[str, GridMap] = {}
        self._map_paths: Dict[str, str] = {}
        self._access_times: Dict[str, float] = {}
        # Re-entrant: registering may trigger a cleanup under the same lock
        self._lock = threading.RLock()
        self.max_cache_size = max_cache_size

    def register_map(self, source: str, grid: GridMap) -> str:
        """Register a map and return its unique ID.

        Args:
            source: Path or builtin name the map was loaded from
            grid: The loaded map

        Returns:
            str: A unique map_id
        """
        with self._lock:
            map_id = str(uuid.uuid4())
            self._maps[map_id] = grid
            self._map_paths[map_id] = source
            self._access_times[map_id] = time.monotonic()
            if len(self._maps) > self.max_cache_size:
                self.perform_cache_cleanup(keep=map_id)
            return map_id

    def get_map(self, map_id: str) -> Optional[GridMap]:
        """Get a map by ID and refresh its access time."""
        with self._lock:
            if map_id in self._maps:
                self._access_times[map_id] = time.monotonic()
                return self._maps[map_id]
            return None

    def get_map_path(self, map_id: str) -> Optional[str]:
        with self._lock:
            return self._map_paths.get(map_id)

    def unregister_map(self, map_id: str) -> bool:
        """Drop a map from the registry.

        Returns:
            bool: True if the map was found and removed
        """
        with self._lock:
            if map_id not in self._maps:
                return False
            del self._maps[map_id]
            del self._map_paths[map_id]
            del self._access_times[map_id]
            return True

    def perform_cache_cleanup(self, keep: Optional[str] = None) -> int:
        """Evict least recently used maps beyond the cache size.

        Args:
            keep: A map ID that must survive this pass

        Returns:
            int: Number of maps removed
        """
        with self._lock:
            if len(self._maps) <= self.max_cache_size:
                return 0
            candidates = sorted((k for k in self._access_times if k != keep), key=lambda k: self._access_times[k])
            to_remove = candidates[:len(self._maps) - self.max_cache_size]
            for map_id in to_remove:
                logger.info(f"Evicting map from cache: {self._map_paths[map_id]} ({map_id})")
                self.unregister_map(map_id)
            return len(to_remove)

    def get_all_map_ids(self) -> List[str]:
        with self._lock:
            return list(self._maps.keys())

    def get_stats(self) -> Dict[str, Any]:
        """Get statistics about the registry.

        Returns:
            dict: Map count, cache size, IDs and their sources
        """
        with self._lock:
            return {
                "total_maps": len(self._maps),
                "max_cache_size": self.max_cache_size,
                "map_ids": list(self._maps.keys()),
                "sources": dict(self._map_paths),
            }


map_registry = MapRegistry(max_cache_size=MAX_CACHE_SIZE)


def maintain_map_registry(registry: MapRegistry = map_registry, interval: float = CACHE_MAINTENANCE_INTERVAL,
                          stop: Optional[threading.Event] = None) -> None:
    """Background loop that periodically trims the registry."""
    logger.info("Map registry maintenance thread started")
    stop = stop or threading.Event()
    while not stop.wait(interval):
        try:
            removed = registry.perform_cache_cleanup()
            if removed > 0:
                logger.info(f"Map registry maintenance: removed {removed} maps from cache")
            logger.debug(f"Map registry stats: {registry.get_stats()}")
        except Exception as e:
            logger.exception(f"Error in map registry maintenance thread: {str(e)}")


def start_maintenance_thread(registry: MapRegistry = map_registry,
                             interval: float = CACHE_MAINTENANCE_INTERVAL) -> threading.Event:
    """Start the maintenance thread; set the returned event to stop it."""
    stop = threading.Event()
    thread = threading.Thread(target=maintain_map_registry, args=(registry, interval, stop), daemon=True)
    thread.start()
    return stop
