"""
Experiment specs and trial execution.

An experiment spec is a section file::

    [map]
    builtin office            # or: path maps/office.pgm
    [robot]
    footprint_radius 0.15
    [waypoints]
    C 6.0 5.0
    NW 1.2 8.8
    [tasks]
    C NW
    [algorithms]
    random-walk 200
    wall-bounce 180
    bug2-l 1
    vl-explore 20
    [limits]
    vl-explore 100
    [trial]
    seed 0
"""

import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import psutil

from ..baselines.bug import POLICY_NAMES as BUG_NAMES
from ..baselines.bug import bug_policy, parse_bug_name
from ..baselines.random_walk import RandomWalkPolicy
from ..baselines.wall_bounce import WallBouncePolicy
from ..baselines.wavefront import WaveParams, WavefrontResult, run_wavefront
from ..core.errors import ConfigurationError, SimulationError
from ..core.sections import Entry, parse_sections
from ..core.simkernel import (DEFAULT_GOAL_RADIUS, DEFAULT_SIM_DT, DEFAULT_STRIDE, Policy, RobotSpec,
                              TrialConfig, TrialOutcome, TrialStatus, run_trial)
from ..core.worldmap import GridMap, Point, Pose, is_free_disk, load_map
from ..maps.fixtures import BUILTIN_MAPS, OFFICE_WAYPOINTS
from ..pipeline import VlExploreConfig, VlExplorePolicy

logger = logging.getLogger(__name__)

SPEC_SECTIONS = ("map", "robot", "waypoints", "tasks", "algorithms", "limits", "trial")
RANDOM_WALK = "random-walk"
WALL_BOUNCE = "wall-bounce"
VL_EXPLORE = "vl-explore"
VL_EXPLORE_VARIANTS = {
    VL_EXPLORE: (False, False),
    "vl-explore-no-look-around": (True, False),
    "vl-explore-no-familiarity": (False, True),
}
ALGORITHMS = [RANDOM_WALK, WALL_BOUNCE] + BUG_NAMES + list(VL_EXPLORE_VARIANTS)
DEFAULT_COUNTS = {RANDOM_WALK: 200, WALL_BOUNCE: 180}
VL_EXPLORE_LIMIT = 100.0
TRAVERSAL_LIMIT = 1000.0
RANDOM_WALK_CEILING_DIAGONALS = 20.0
DEFAULT_WAVE_STEPS = 20_000


def default_limit(algo: str) -> float:
    """100 m for the VL-Explore family, 1000 m for the traversal baselines."""
    return VL_EXPLORE_LIMIT if algo in VL_EXPLORE_VARIANTS else TRAVERSAL_LIMIT


@dataclass(frozen=True)
class ExperimentSpec:
    """A full algorithm x task grid.

    Args:
        map_source: Map file path, or ``builtin:<name>`` for a bundled fixture
        robot: Robot envelope shared by every trial
        waypoints: Named free-space points
        tasks: (source label, target label) pairs
        algorithms: Trial count per algorithm name
        limits: Distance limit per algorithm name
        seed: Root of every trial's seed
        sim_dt: Kernel step in seconds
        goal_radius: Success radius in meters
        stride: Path-length subsampling stride
        wave_max_steps: Step cap of the wave-front baseline runs
        target_description: Text naming the VL-Explore target
    """

    map_source: str
    robot: RobotSpec = field(default_factory=RobotSpec)
    waypoints: Dict[str, Point] = field(default_factory=dict)
    tasks: Tuple[Tuple[str, str], ...] = ()
    algorithms: Dict[str, int] = field(default_factory=dict)
    limits: Dict[str, float] = field(default_factory=dict)
    seed: int = 0
    sim_dt: float = DEFAULT_SIM_DT
    goal_radius: float = DEFAULT_GOAL_RADIUS
    stride: int = DEFAULT_STRIDE
    wave_max_steps: int = DEFAULT_WAVE_STEPS
    target_description: str = "teddy bear"

    def limit_for(self, algo: str) -> float:
        return self.limits.get(algo, default_limit(algo))

    def trial_count(self, algo: str) -> int:
        return self.algorithms[algo]


def load_grid(map_source: str) -> GridMap:
    if map_source.startswith("builtin:"):
        name = map_source.split(":", 1)[1]
        if name not in BUILTIN_MAPS:
            raise ConfigurationError(f"unknown builtin map {name!r}; choose from {sorted(BUILTIN_MAPS)}")
        return BUILTIN_MAPS[name]()
    return load_map(map_source)


def _number(entry: Entry, text: str, problems: List[str], kind=float):
    try:
        return kind(text)
    except ValueError:
        problems.append(f"line {entry.line}: expected a number, got {text!r}")
        return None


def parse_experiment_spec(text: str, base_dir: str = ".") -> ExperimentSpec:
    """Parse a spec file, collecting every problem before raising.

    Raises:
        SectionParseError: On section syntax errors
        ConfigurationError: Listing all value problems found
    """
    sections = parse_sections(text, SPEC_SECTIONS)
    problems: List[str] = []

    map_source = None
    for entry in sections.get("map", []):
        key, value = entry.key_value()
        if key == "path":
            map_source = value if os.path.isabs(value) else os.path.join(base_dir, value)
        elif key == "builtin":
            map_source = f"builtin:{value}"
        else:
            problems.append(f"line {entry.line}: unknown map key {key!r}")
    if map_source is None:
        problems.append("[map] needs a 'path' or 'builtin' entry")

    robot_fields: Dict[str, float] = {}
    for entry in sections.get("robot", []):
        key, value = entry.key_value()
        if key not in ("footprint_radius", "max_speed", "max_turn_rate", "halt_range"):
            problems.append(f"line {entry.line}: unknown robot key {key!r}")
            continue
        number = _number(entry, value, problems)
        if number is not None:
            robot_fields[key] = number

    waypoints: Dict[str, Point] = {}
    for entry in sections.get("waypoints", []):
        parts = entry.text.split()
        if len(parts) != 3:
            problems.append(f"line {entry.line}: expected '<label> <x> <y>'")
            continue
        x = _number(entry, parts[1], problems)
        y = _number(entry, parts[2], problems)
        if parts[0] in waypoints:
            problems.append(f"line {entry.line}: waypoint {parts[0]!r} defined twice")
        if x is not None and y is not None:
            waypoints[parts[0]] = (x, y)

    tasks: List[Tuple[str, str]] = []
    for entry in sections.get("tasks", []):
        parts = entry.text.split()
        if len(parts) != 2:
            problems.append(f"line {entry.line}: expected '<source> <target>'")
            continue
        tasks.append((parts[0], parts[1]))

    algorithms: Dict[str, int] = {}
    for entry in sections.get("algorithms", []):
        name, value = entry.key_value()
        count = _number(entry, value, problems, int) if value else DEFAULT_COUNTS.get(name, 1)
        if count is not None:
            algorithms[name] = count

    limits: Dict[str, float] = {}
    for entry in sections.get("limits", []):
        name, value = entry.key_value()
        number = _number(entry, value, problems)
        if number is not None:
            limits[name] = number

    trial: Dict[str, object] = {}
    trial_kinds = {"seed": int, "sim_dt": float, "goal_radius": float, "stride": int, "wave_max_steps": int}
    for entry in sections.get("trial", []):
        key, value = entry.key_value()
        if key == "target":
            trial["target_description"] = value
        elif key in trial_kinds:
            number = _number(entry, value, problems, trial_kinds[key])
            if number is not None:
                trial[key] = number
        else:
            problems.append(f"line {entry.line}: unknown trial key {key!r}")

    robot = None
    try:
        robot = RobotSpec(**robot_fields)
    except ConfigurationError as e:
        problems.append(str(e))
    if problems:
        raise ConfigurationError("invalid experiment spec", problems)
    return ExperimentSpec(map_source, robot, waypoints, tuple(tasks), algorithms, limits, **trial)


def load_experiment_spec(path: str) -> ExperimentSpec:
    with open(path, "r", encoding="utf-8") as handle:
        return parse_experiment_spec(handle.read(), os.path.dirname(os.path.abspath(path)))


def validate_experiment(spec: ExperimentSpec, grid: Optional[GridMap] = None) -> GridMap:
    """Pre-flight check of a spec against its map; reports every problem at once.

    Returns:
        GridMap: The loaded map
    """
    problems: List[str] = []
    if grid is None:
        try:
            grid = load_grid(spec.map_source)
        except ConfigurationError as e:
            raise ConfigurationError("invalid experiment spec", [f"map {spec.map_source}: {e}"])

    for label, point in sorted(spec.waypoints.items()):
        if not grid.contains(*point):
            problems.append(f"waypoint {label} ({point[0]}, {point[1]}) is outside the map")
        elif not is_free_disk(grid, point, spec.robot.footprint_radius):
            problems.append(f"waypoint {label} ({point[0]}, {point[1]}) is not free for the robot footprint")
    if not spec.tasks:
        problems.append("no tasks given")
    for source, target in spec.tasks:
        for label in (source, target):
            if label not in spec.waypoints:
                problems.append(f"task {source}->{target}: unknown waypoint {label!r}")
    if not spec.algorithms:
        problems.append("no algorithms given")
    for name, count in sorted(spec.algorithms.items()):
        if name not in ALGORITHMS:
            problems.append(f"unknown algorithm {name!r}")
        if count < 1:
            problems.append(f"algorithm {name}: trial count must be at least 1, got {count}")
    for name, limit in sorted(spec.limits.items()):
        if not limit > 0:
            problems.append(f"limit for {name} must be positive, got {limit}")
    for name, value in (("sim_dt", spec.sim_dt), ("goal_radius", spec.goal_radius)):
        if not value > 0:
            problems.append(f"{name} must be positive, got {value}")
    if spec.stride < 1:
        problems.append(f"stride must be at least 1, got {spec.stride}")
    if spec.wave_max_steps < 1:
        problems.append(f"wave_max_steps must be at least 1, got {spec.wave_max_steps}")
    if problems:
        raise ConfigurationError("invalid experiment spec", problems)
    return grid


def builtin_office_spec(trials: int = 20, seed: int = 0) -> ExperimentSpec:
    """Desk-scale office experiment over every waypoint pair around the center."""
    tasks = tuple(("C", label) for label in ("NW", "NE", "SW", "SE"))
    algorithms = {RANDOM_WALK: trials, WALL_BOUNCE: trials, VL_EXPLORE: trials}
    algorithms.update({name: 1 for name in BUG_NAMES})
    return ExperimentSpec("builtin:office", waypoints=dict(OFFICE_WAYPOINTS), tasks=tasks,
                          algorithms=algorithms, seed=seed)


# -- trial execution ------------------------------------------------------------

@dataclass(frozen=True)
class TrialTask:
    """One scheduled trial; plain data so it crosses process boundaries."""

    algo: str
    source: str
    target: str
    trial: int
    count: int
    seed: int
    source_point: Point
    target_point: Point
    limit: float


@dataclass(frozen=True)
class TrialResult:
    """A finished trial; ``uncapped_path`` keeps random-walk lengths beyond the cutoff."""

    task: TrialTask
    status: TrialStatus
    path_length: float
    steps: int
    trajectory_xy: np.ndarray
    uncapped_path: float = math.nan


def trial_seed(root: int, pair_index: int, algo: str, trial: int) -> int:
    sequence = np.random.SeedSequence([root, pair_index, ALGORITHMS.index(algo), trial])
    return int(sequence.generate_state(1)[0])


def make_policy(algo: str, target: Point, trial: int = 0, count: int = 1,
                vl_config: Optional[VlExploreConfig] = None) -> Policy:
    """Instantiate a policy by CLI name."""
    if algo == RANDOM_WALK:
        return RandomWalkPolicy()
    if algo == WALL_BOUNCE:
        return WallBouncePolicy(2.0 * math.pi * trial / count)
    if algo in BUG_NAMES:
        variant, rule = parse_bug_name(algo)
        return bug_policy(variant, rule, target)
    if algo in VL_EXPLORE_VARIANTS:
        no_look_around, no_familiarity = VL_EXPLORE_VARIANTS[algo]
        cfg = (vl_config or VlExploreConfig()).ablated(no_look_around, no_familiarity)
        return VlExplorePolicy(cfg)
    raise ConfigurationError(f"unknown algorithm {algo!r}; choose from {', '.join(ALGORITHMS)}")


def start_heading(algo: str, seed: int, source: Point, target: Point) -> float:
    if algo in VL_EXPLORE_VARIANTS:
        return float(np.random.default_rng(seed).uniform(-math.pi, math.pi))
    return math.atan2(target[1] - source[1], target[0] - source[0])


def run_single_trial(algo: str, grid: GridMap, robot: RobotSpec, source: Pose, target: Point,
                     limit: float, seed: int = 0, sim_dt: float = DEFAULT_SIM_DT,
                     goal_radius: float = DEFAULT_GOAL_RADIUS, stride: int = DEFAULT_STRIDE,
                     trial: int = 0, count: int = 1,
                     vl_config: Optional[VlExploreConfig] = None) -> Tuple[TrialOutcome, Policy]:
    """Run one trial of a named algorithm and return the outcome with the policy used."""
    policy = make_policy(algo, target, trial, count, vl_config)
    config = TrialConfig(source, target, limit, sim_dt, seed, goal_radius, stride)
    return run_trial(policy, config, grid, robot), policy


_worker_context: Dict[str, object] = {}


def _init_worker(grid: GridMap, spec: ExperimentSpec, vl_config: Optional[VlExploreConfig]) -> None:
    _worker_context.update(grid=grid, spec=spec, vl_config=vl_config)


def execute_task(task: TrialTask) -> TrialResult:
    grid = _worker_context["grid"]
    spec = _worker_context["spec"]
    vl_config = _worker_context["vl_config"]
    limit = task.limit
    if task.algo == RANDOM_WALK:
        # One uncapped batch serves every cutoff of the R-Lbar sweep
        limit = max(limit, RANDOM_WALK_CEILING_DIAGONALS * grid.diagonal)
    heading = start_heading(task.algo, task.seed, task.source_point, task.target_point)
    outcome, _ = run_single_trial(task.algo, grid, spec.robot, Pose(*task.source_point, heading),
                                  task.target_point, limit, task.seed, spec.sim_dt, spec.goal_radius,
                                  spec.stride, task.trial, task.count, vl_config)
    status = outcome.status
    uncapped = outcome.path_length if outcome.success else math.nan
    if task.algo == RANDOM_WALK and outcome.success and outcome.path_length > task.limit:
        status = TrialStatus.FAIL_DISTANCE_LIMIT
    # Only the first trial of each batch is drawn on overlays
    xy = outcome.trajectory.xy if task.trial == 0 else np.empty((0, 2))
    return TrialResult(task, status, outcome.path_length, outcome.wall_steps, xy, uncapped)


def plan_trials(spec: ExperimentSpec) -> List[TrialTask]:
    tasks = []
    for pair_index, (source, target) in enumerate(spec.tasks):
        for algo in sorted(spec.algorithms):
            count = spec.trial_count(algo)
            for trial in range(count):
                tasks.append(TrialTask(algo, source, target, trial, count,
                                       trial_seed(spec.seed, pair_index, algo, trial),
                                       spec.waypoints[source], spec.waypoints[target], spec.limit_for(algo)))
    return tasks


def run_trials(spec: ExperimentSpec, grid: GridMap, tasks: Sequence[TrialTask], workers: Optional[int] = None,
               vl_config: Optional[VlExploreConfig] = None) -> List[TrialResult]:
    """Run tasks, in worker processes when ``workers`` > 1; results come back in task order."""
    if vl_config is None:
        vl_config = VlExploreConfig(target_description=spec.target_description)
    workers = workers if workers is not None else (psutil.cpu_count(logical=False) or 1)
    if workers <= 1 or len(tasks) <= 1:
        _init_worker(grid, spec, vl_config)
        results = []
        for index, task in enumerate(tasks, start=1):
            results.append(execute_task(task))
            logger.debug(f"[{index}/{len(tasks)}] {task.algo} {task.source}->{task.target} #{task.trial}: "
                         f"{results[-1].status.value}")
        return results
    logger.info(f"Running {len(tasks)} trials on {workers} workers")
    with ProcessPoolExecutor(max_workers=workers, initializer=_init_worker,
                             initargs=(grid, spec, vl_config)) as pool:
        return list(pool.map(execute_task, tasks, chunksize=max(1, len(tasks) // (4 * workers))))


def pair_baselines(spec: ExperimentSpec, grid: GridMap,
                   params: Optional[WaveParams] = None) -> Dict[Tuple[str, str], WavefrontResult]:
    """Wave-front run per task pair; its first contact distance is the pair baseline."""
    params = params or WaveParams(robot_size=2.0 * spec.robot.footprint_radius, max_steps=spec.wave_max_steps)
    results = {}
    for source, target in spec.tasks:
        if (source, target) in results:
            continue
        result = run_wavefront(grid, spec.waypoints[source], spec.waypoints[target], params)
        if not math.isfinite(result.first_contact_distance):
            raise SimulationError(f"wave-front never reached {target} from {source} "
                                  f"within {params.max_steps} steps")
        results[(source, target)] = result
    return results


def with_overrides(spec: ExperimentSpec, algo: Optional[str] = None, seed: Optional[int] = None,
                   stride: Optional[int] = None) -> ExperimentSpec:
    """Apply command-line overrides to a loaded spec."""
    changes = {}
    if algo is not None:
        counts = {}
        for name in algo.split(","):
            counts[name] = spec.algorithms.get(name, DEFAULT_COUNTS.get(name, 1))
        changes["algorithms"] = counts
    if seed is not None:
        changes["seed"] = seed
    if stride is not None:
        changes["stride"] = stride
    return replace(spec, **changes) if changes else spec
