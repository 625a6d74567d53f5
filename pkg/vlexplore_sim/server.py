"""
MCP tool server for the navigation simulator.

Exposes map loading, single trials, wave-front baselines and metric
aggregation as tools that return the standard JSON envelope.
"""

import inspect
import logging
import math
import os
import time
from typing import Callable, Dict, List, Optional

import psutil
from mcp.server.fastmcp import FastMCP

from . import __version__
from .baselines.wavefront import WaveParams, run_wavefront
from .core.errors import MetricsError
from .core.registry import map_registry
from .core.responses import error_response, response_from_error, success_response
from .core.simkernel import RobotSpec
from .core.worldmap import Pose
from .evaluation import experiment
from .evaluation.experiment import ALGORITHMS, DEFAULT_WAVE_STEPS, default_limit, load_grid
from .evaluation.metrics import RunRecord, aggregate

logger = logging.getLogger(__name__)

mcp = FastMCP("vlexplore-sim")

# Global server start time for uptime tracking
server_start_time = time.time()

_tools: Dict[str, Callable[..., str]] = {}


def tool(func: Callable[..., str]) -> Callable[..., str]:
    """Register a function as an MCP tool and in the local tool index."""
    _tools[func.__name__] = func
    return mcp.tool()(func)


def _missing_map(map_id: str) -> str:
    return error_response(f"Map not found: {map_id}", "MAP_NOT_FOUND")


@tool
def load_grid_map(path: str = "", builtin: str = "") -> str:
    """Load an occupancy map from a PGM file or a builtin fixture

    Args:
        path: Path to the .pgm raster; its .meta sidecar must sit next to it
        builtin: Name of a bundled map (e.g. 'office'), used when path is empty

    Returns:
        JSON string with the map ID and geometry
    """
    try:
        if bool(path) == bool(builtin):
            return error_response("Give exactly one of 'path' or 'builtin'", "INVALID_ARGUMENT")
        source = path if path else f"builtin:{builtin}"
        if path and not os.path.exists(path):
            return error_response(f"File not found: {path}", "FILE_NOT_FOUND")
        grid = load_grid(source)
        map_id = map_registry.register_map(source, grid)
        return success_response("Map loaded successfully", {
            "map_id": map_id,
            "source": source,
            "resolution": grid.resolution,
            "shape": list(grid.occupied.shape),
            "bounds": list(grid.bounds),
        })
    except Exception as e:
        logger.exception(f"Error loading map: {str(e)}")
        return response_from_error(e)


@tool
def list_grid_maps() -> str:
    """List the maps currently held by the registry

    Returns:
        JSON string with map IDs and their sources
    """
    try:
        stats = map_registry.get_stats()
        return success_response(f"{stats['total_maps']} maps loaded", {"maps": stats["sources"]})
    except Exception as e:
        logger.exception(f"Error listing maps: {str(e)}")
        return response_from_error(e)


@tool
def close_grid_map(map_id: str) -> str:
    """Drop a map from the registry

    Args:
        map_id: ID returned by load_grid_map
    """
    try:
        if not map_registry.unregister_map(map_id):
            return _missing_map(map_id)
        return success_response("Map closed", {"map_id": map_id})
    except Exception as e:
        logger.exception(f"Error closing map: {str(e)}")
        return response_from_error(e)


@tool
def run_single_trial(map_id: str, algo: str, source_x: float, source_y: float, target_x: float,
                     target_y: float, heading: float = 0.0, limit: Optional[float] = None,
                     seed: int = 0, stride: int = 5) -> str:
    """Run one navigation trial on a loaded map

    Args:
        map_id: ID returned by load_grid_map
        algo: Algorithm name, e.g. 'bug2-l', 'random-walk' or 'vl-explore'
        source_x, source_y, heading: Start pose in meters and radians
        target_x, target_y: Target point in meters
        limit: Distance limit; 100 m for vl-explore variants, 1000 m otherwise
        seed: Trial seed
        stride: Path-length subsampling stride

    Returns:
        JSON string with status, path length and step count
    """
    try:
        grid = map_registry.get_map(map_id)
        if grid is None:
            return _missing_map(map_id)
        if algo not in ALGORITHMS:
            return error_response(f"Unknown algorithm {algo!r}; choose from {', '.join(ALGORITHMS)}",
                                  "INVALID_ARGUMENT")
        limit = limit if limit is not None else default_limit(algo)
        outcome, _ = experiment.run_single_trial(algo, grid, RobotSpec(), Pose(source_x, source_y, heading),
                                                 (target_x, target_y), limit, seed=seed, stride=stride)
        return success_response(f"Trial finished: {outcome.status.value}", {
            "algo": algo,
            "status": outcome.status.value,
            "path_length_m": outcome.path_length,
            "raw_length_m": outcome.raw_length,
            "steps": outcome.wall_steps,
            "samples": len(outcome.trajectory),
        })
    except Exception as e:
        logger.exception(f"Error running trial: {str(e)}")
        return response_from_error(e)


@tool
def run_wavefront_baseline(map_id: str, source_x: float, source_y: float, target_x: float, target_y: float,
                           robot_size: float = 0.3, max_steps: int = DEFAULT_WAVE_STEPS) -> str:
    """Run the wave-front baseline between two points

    Args:
        map_id: ID returned by load_grid_map
        source_x, source_y: Source point in meters
        target_x, target_y: Target point in meters
        robot_size: Width of the initial Gaussian pulse in meters
        max_steps: Integration step cap

    Returns:
        JSON string with first contact distance and arrival statistics
    """
    try:
        grid = map_registry.get_map(map_id)
        if grid is None:
            return _missing_map(map_id)
        result = run_wavefront(grid, (source_x, source_y), (target_x, target_y),
                               WaveParams(robot_size=robot_size, max_steps=max_steps))

        def finite(value: float) -> Optional[float]:
            return value if math.isfinite(value) else None

        return success_response("Wave-front finished", {
            "first_contact_distance_m": finite(result.first_contact_distance),
            "mean_m": finite(result.mean),
            "std_m": finite(result.std),
            "peak_m": finite(result.peak_distance),
            "truncated": result.truncated,
            "steps": result.steps,
            "drained": result.arrival.total_drained,
        })
    except Exception as e:
        logger.exception(f"Error running wave-front: {str(e)}")
        return response_from_error(e)


@tool
def compute_metrics(records: List[dict]) -> str:
    """Aggregate success rate, mean inverse path length and SPL

    Args:
        records: Items with 'success' (bool), 'path_length_m' and 'baseline_m';
            'source' and 'target' are optional labels

    Returns:
        JSON string with N, N_s, R, Lbar and SPL
    """
    try:
        runs = []
        for index, item in enumerate(records):
            try:
                success = bool(item["success"])
                path = float(item.get("path_length_m", math.nan)) if success else math.nan
                pair = (str(item.get("source", "")), str(item.get("target", "")))
                runs.append(RunRecord(pair, success, path, float(item["baseline_m"])))
            except KeyError as missing:
                raise MetricsError(f"record {index} lacks {missing}")
        stats = aggregate(runs)
        return success_response("Metrics computed", {
            "N": stats.n,
            "N_s": stats.n_success,
            "R": stats.success_rate,
            "Lbar": stats.mean_inverse_length,
            "Lbar_defined": stats.lbar_defined,
            "SPL": stats.spl,
        })
    except Exception as e:
        logger.exception(f"Error computing metrics: {str(e)}")
        return response_from_error(e)


@tool
def get_health() -> str:
    """Get server health information

    Returns:
        JSON string with health metrics
    """
    try:
        uptime_seconds = int(time.time() - server_start_time)
        stats = map_registry.get_stats()
        process = psutil.Process()
        health_data = {
            "status": "healthy",
            "uptime_seconds": uptime_seconds,
            "maps": {
                "total": stats["total_maps"],
                "ids": stats["map_ids"],
            },
            "memory_rss_mb": round(process.memory_info().rss / 2 ** 20, 1),
            "cpu_count": psutil.cpu_count(),
            "version": __version__,
        }
        return success_response("Server is healthy", health_data)
    except Exception as e:
        logger.exception(f"Error getting health information: {str(e)}")
        return error_response(f"Error getting health information: {str(e)}")


@tool
def get_available_tools() -> str:
    """Get information about all available tools

    Returns:
        JSON string with detailed information about all available tools
    """
    try:
        tools_info = []
        for name, func in sorted(_tools.items()):
            sig = inspect.signature(func)
            parameters = []
            for param_name, param in sig.parameters.items():
                param_info = {
                    "name": param_name,
                    "type": str(param.annotation) if param.annotation != inspect.Parameter.empty else "any"
                }
                if param.default != inspect.Parameter.empty:
                    param_info["default"] = str(param.default)
                parameters.append(param_info)
            tools_info.append({
                "name": name,
                "description": func.__doc__.strip().splitlines()[0] if func.__doc__ else "No description available",
                "parameters": parameters,
            })
        return success_response("Available tools", {
            "tools_count": len(tools_info),
            "tools": tools_info
        })
    except Exception as e:
        logger.exception(f"Error getting available tools: {str(e)}")
        return error_response(f"Error getting available tools: {str(e)}")


def serve() -> None:
    """Run the tool server over stdio."""
    logger.info("Starting vlexplore-sim MCP server with stdio protocol")
    mcp.run()
