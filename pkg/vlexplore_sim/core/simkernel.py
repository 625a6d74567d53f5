"""
Discrete-time trial execution.

The kernel owns robot kinematics, halt emulation, collision truncation,
trajectory recording and the failure criteria. Policies only see an
``Observation`` and answer with a ``MotionCommand`` or a ``PolicySignal``.
"""

import csv
import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import ConfigurationError
from .worldmap import GridMap, Point, Pose, is_free_disk, raycast

logger = logging.getLogger(__name__)

DEFAULT_SIM_DT = 0.1
DEFAULT_GOAL_RADIUS = 0.75
DEFAULT_STRIDE = 5
TRUNCATION_TOLERANCE = 1e-3  # bisection stops at 1 mm
STEP_CAP_FACTOR = 20

TRAJECTORY_CSV_HEADER = ["t", "x", "y", "heading"]
TRIAL_CSV_HEADER = ["algo", "source", "target", "seed", "status", "path_length_m", "steps"]


@dataclass(frozen=True)
class RobotSpec:
    """Physical envelope of the simulated robot."""

    footprint_radius: float = 0.15
    max_speed: float = 2.0
    max_turn_rate: float = math.pi
    halt_range: float = 0.1

    def __post_init__(self):
        for name in ("footprint_radius", "max_speed", "max_turn_rate", "halt_range"):
            value = getattr(self, name)
            if not value > 0:
                raise ConfigurationError(f"RobotSpec.{name} must be positive, got {value}")


@dataclass(frozen=True)
class MotionCommand:
    """Body-frame velocity command: surge (forward), sway (left), yaw rate (CCW)."""

    surge: float = 0.0
    sway: float = 0.0
    yaw_rate: float = 0.0

    def clamped(self, robot: RobotSpec) -> "MotionCommand":
        speed = math.hypot(self.surge, self.sway)
        scale = robot.max_speed / speed if speed > robot.max_speed else 1.0
        yaw = max(-robot.max_turn_rate, min(robot.max_turn_rate, self.yaw_rate))
        return MotionCommand(self.surge * scale, self.sway * scale, yaw)

    @property
    def translates(self) -> bool:
        return self.surge != 0.0 or self.sway != 0.0

    @classmethod
    def toward(cls, direction: float, speed: float, pose: Pose, yaw_rate: float = 0.0) -> "MotionCommand":
        """Translate along a world-frame direction without turning first."""
        relative = direction - pose.heading
        return cls(speed * math.cos(relative), speed * math.sin(relative), yaw_rate)


STOP = MotionCommand()


class PolicySignal(Enum):
    """Terminal signals a policy can raise instead of a command."""

    LOOP_DETECTED = "loop_detected"
    STUCK = "stuck"


class TrialStatus(Enum):
    SUCCESS = "Success"
    FAIL_DISTANCE_LIMIT = "FailDistanceLimit"
    FAIL_LOOP_DETECTED = "FailLoopDetected"
    FAIL_STUCK = "FailStuck"


@dataclass(frozen=True)
class Trajectory:
    """Ordered (time, pose) samples starting at t = 0."""

    samples: Tuple[Tuple[float, Pose], ...]

    def __len__(self):
        return len(self.samples)

    @property
    def times(self) -> np.ndarray:
        return np.array([t for t, _ in self.samples], dtype=float)

    @property
    def xy(self) -> np.ndarray:
        return np.array([[p.x, p.y] for _, p in self.samples], dtype=float).reshape(-1, 2)

    @property
    def final_pose(self) -> Pose:
        return self.samples[-1][1]

    def rows(self) -> List[List[str]]:
        return [[f"{t:.3f}", f"{p.x:.6f}", f"{p.y:.6f}", f"{p.heading:.6f}"] for t, p in self.samples]


@dataclass(frozen=True)
class TrialConfig:
    """Setup of one simulated mission."""

    source: Pose
    target: Point
    distance_limit: float = 1000.0
    sim_dt: float = DEFAULT_SIM_DT
    seed: int = 0
    goal_radius: float = DEFAULT_GOAL_RADIUS
    stride: int = DEFAULT_STRIDE
    max_steps: Optional[int] = None

    def __post_init__(self):
        problems = []
        if not self.distance_limit > 0:
            problems.append(f"distance_limit must be positive, got {self.distance_limit}")
        if not self.sim_dt > 0:
            problems.append(f"sim_dt must be positive, got {self.sim_dt}")
        if not self.goal_radius > 0:
            problems.append(f"goal_radius must be positive, got {self.goal_radius}")
        if self.stride < 1:
            problems.append(f"stride must be at least 1, got {self.stride}")
        if problems:
            raise ConfigurationError("invalid trial configuration", problems)
        object.__setattr__(self, "target", (float(self.target[0]), float(self.target[1])))

    def step_cap(self, robot: RobotSpec) -> int:
        """Hard step ceiling so that policies idling in place still terminate."""
        if self.max_steps is not None:
            return self.max_steps
        return STEP_CAP_FACTOR * int(math.ceil(self.distance_limit / (robot.max_speed * self.sim_dt)))


@dataclass(frozen=True)
class TrialOutcome:
    status: TrialStatus
    path_length: float
    wall_steps: int
    trajectory: Trajectory
    raw_length: float = 0.0

    @property
    def success(self) -> bool:
        return self.status is TrialStatus.SUCCESS


@dataclass
class Observation:
    """What a policy sees at each kernel step."""

    time: float
    step: int
    pose: Pose
    halted: bool
    target: Point
    distance_travelled: float
    grid: GridMap
    robot: RobotSpec
    config: TrialConfig
    rng: np.random.Generator = field(repr=False)


class Policy(ABC):
    """Decision procedure driven by ``run_trial``; one instance per trial."""

    name = "policy"

    def begin(self, obs: Observation) -> None:
        """Called once before the first step."""

    @abstractmethod
    def act(self, obs: Observation) -> Union[MotionCommand, PolicySignal]:
        """Return the next command or a terminal signal."""


def halt_asserted(grid: GridMap, robot: RobotSpec, position: Point, direction: float) -> bool:
    """Emulated proximity switch: obstacle within halt range of the footprint edge."""
    hit = raycast(grid, position, direction, robot.footprint_radius + robot.halt_range)
    return hit is not None and hit.distance - robot.footprint_radius <= robot.halt_range


def direction_blocked(grid: GridMap, robot: RobotSpec, position: Point, direction: float) -> bool:
    """Whether translating along ``direction`` would halt or collide almost at once."""
    if halt_asserted(grid, robot, position, direction):
        return True
    ahead = (position[0] + robot.halt_range * math.cos(direction),
             position[1] + robot.halt_range * math.sin(direction))
    return not is_free_disk(grid, ahead, robot.footprint_radius)


def step(state: Pose, cmd: MotionCommand, dt: float, grid: GridMap,
         robot: RobotSpec) -> Tuple[Pose, bool]:
    """Advance the robot by one kernel step.

    Args:
        state: Current collision-free pose
        cmd: Body-frame command, clamped to the robot's limits
        dt: Step duration in seconds
        grid: The map
        robot: Robot envelope

    Returns:
        tuple: (new pose, halted). ``halted`` is set when the proximity switch
        suppressed translation or when the move was truncated at contact.
    """
    if not dt > 0:
        raise ConfigurationError(f"dt must be positive, got {dt}")
    cmd = cmd.clamped(robot)
    heading = state.heading
    new_heading = heading + cmd.yaw_rate * dt

    vx = cmd.surge * math.cos(heading) - cmd.sway * math.sin(heading)
    vy = cmd.surge * math.sin(heading) + cmd.sway * math.cos(heading)
    distance = math.hypot(vx, vy) * dt
    if distance <= 0.0:
        return Pose(state.x, state.y, new_heading), False

    direction = math.atan2(vy, vx)
    if halt_asserted(grid, robot, state.position, direction):
        return Pose(state.x, state.y, new_heading), True

    ux, uy = math.cos(direction), math.sin(direction)
    radius = robot.footprint_radius

    def free_at(fraction: float) -> bool:
        return is_free_disk(grid, (state.x + ux * distance * fraction, state.y + uy * distance * fraction), radius)

    # Sub-steps no longer than half a cell so thin walls cannot be skipped
    sub_steps = max(1, int(math.ceil(distance / (0.5 * grid.resolution))))
    reached = 0.0
    for index in range(1, sub_steps + 1):
        fraction = index / sub_steps
        if not free_at(fraction):
            low, high = reached, fraction
            while (high - low) * distance > TRUNCATION_TOLERANCE:
                middle = 0.5 * (low + high)
                if free_at(middle):
                    low = middle
                else:
                    high = middle
            return Pose(state.x + ux * distance * low, state.y + uy * distance * low, new_heading), True
        reached = fraction
    return Pose(state.x + ux * distance, state.y + uy * distance, new_heading), False


def path_length(traj: Union[Trajectory, Sequence[Point]], stride: int = 1) -> float:
    """Length of the polyline through every ``stride``-th sample plus the last one."""
    if stride < 1:
        raise ConfigurationError(f"stride must be at least 1, got {stride}")
    if isinstance(traj, Trajectory):
        points = traj.xy
    else:
        points = np.asarray(traj, dtype=float).reshape(-1, 2)
    if len(points) < 2:
        return 0.0
    indices = list(range(0, len(points), stride))
    if indices[-1] != len(points) - 1:
        indices.append(len(points) - 1)
    kept = points[indices]
    return float(np.sum(np.hypot(*np.diff(kept, axis=0).T)))


def _validate_trial(config: TrialConfig, grid: GridMap, robot: RobotSpec) -> None:
    problems = []
    source = config.source
    if not grid.contains(source.x, source.y):
        problems.append(f"source ({source.x:.3f}, {source.y:.3f}) is outside the map")
    elif not is_free_disk(grid, source, robot.footprint_radius):
        problems.append(f"source ({source.x:.3f}, {source.y:.3f}) collides with an obstacle")
    tx, ty = config.target
    if not grid.contains(tx, ty):
        problems.append(f"target ({tx:.3f}, {ty:.3f}) is outside the map")
    if problems:
        raise ConfigurationError("invalid trial endpoints", problems)


def run_trial(policy: Policy, config: TrialConfig, grid: GridMap, robot: RobotSpec) -> TrialOutcome:
    """Run one mission until success, failure or the step cap.

    The outcome is a pure function of the policy (with its seed), the
    configuration, the map and the robot.
    """
    _validate_trial(config, grid, robot)
    rng = np.random.default_rng(config.seed)
    pose = config.source
    halted = False
    travelled = 0.0
    samples: List[Tuple[float, Pose]] = [(0.0, pose)]
    status: Optional[TrialStatus] = None
    cap = config.step_cap(robot)
    steps = 0

    def observe() -> Observation:
        return Observation(steps * config.sim_dt, steps, pose, halted, config.target, travelled,
                           grid, robot, config, rng)

    policy.begin(observe())
    while status is None:
        if pose.distance_to(config.target) <= config.goal_radius:
            status = TrialStatus.SUCCESS
            break
        if steps >= cap:
            logger.debug(f"{policy.name}: step cap {cap} reached")
            status = TrialStatus.FAIL_STUCK
            break

        action = policy.act(observe())
        if action is PolicySignal.LOOP_DETECTED:
            status = TrialStatus.FAIL_LOOP_DETECTED
            break
        if action is PolicySignal.STUCK:
            status = TrialStatus.FAIL_STUCK
            break

        new_pose, halted = step(pose, action, config.sim_dt, grid, robot)
        travelled += math.hypot(new_pose.x - pose.x, new_pose.y - pose.y)
        pose = new_pose
        steps += 1
        samples.append((steps * config.sim_dt, pose))
        if travelled > config.distance_limit:
            status = TrialStatus.FAIL_DISTANCE_LIMIT

    trajectory = Trajectory(tuple(samples))
    outcome = TrialOutcome(status, path_length(trajectory, config.stride), steps, trajectory, travelled)
    logger.debug(f"{policy.name}: {status.value} after {steps} steps, "
                 f"{outcome.path_length:.2f} m (raw {travelled:.2f} m)")
    return outcome


def write_trajectory_csv(trajectory: Trajectory, path: str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(TRAJECTORY_CSV_HEADER)
        writer.writerows(trajectory.rows())


def read_trajectory_csv(path: str) -> Trajectory:
    samples = []
    with open(path, "r", newline="", encoding="utf-8") as handle:
        for row in csv.DictReader(handle):
            samples.append((float(row["t"]), Pose(float(row["x"]), float(row["y"]), float(row["heading"]))))
    return Trajectory(tuple(samples))


def outcome_row(algo: str, source: str, target: str, seed: int, outcome: TrialOutcome) -> List[str]:
    """One per-trial CSV row matching ``TRIAL_CSV_HEADER``."""
    return [algo, source, target, str(seed), outcome.status.value,
            f"{outcome.path_length:.6f}", str(outcome.wall_steps)]
