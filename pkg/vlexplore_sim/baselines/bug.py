"""
Bug0, Bug1 and Bug2 with left/right turn rules.

All three variants share one rule-sided boundary follower. It keeps the
obstacle on the rule's side at a standoff of footprint radius plus one cell,
steering with two short raycasts (toward the wall and ahead). Contact is
sensed through the kernel's halt emulation.
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Tuple, Union

from ..core.errors import ConfigurationError
from ..core.simkernel import MotionCommand, Observation, Policy, PolicySignal, direction_blocked
from ..core.worldmap import Point, raycast, wrap_angle

logger = logging.getLogger(__name__)

DEFAULT_BUG_SPEED = 0.5
HEADING_SECTORS = 16
AHEAD_SWEEP = math.radians(10.0)
MAX_CORRECTION = math.radians(60.0)


class TurnRule(Enum):
    LEFT = "l"
    RIGHT = "r"

    @property
    def side(self) -> float:
        """+1 when the obstacle is kept on the left, -1 on the right."""
        return 1.0 if self is TurnRule.LEFT else -1.0


class BugVariant(Enum):
    BUG0 = "bug0"
    BUG1 = "bug1"
    BUG2 = "bug2"


class BugMode(Enum):
    MOTION_TO_GOAL = "motion_to_goal"
    BOUNDARY_FOLLOW = "boundary_follow"
    LOOP_RETURN = "loop_return"


@dataclass
class BugState:
    mode: BugMode = BugMode.MOTION_TO_GOAL
    hit_point: Optional[Point] = None
    hit_distance: float = math.inf
    leave_point: Optional[Point] = None
    min_dist_point: Optional[Point] = None
    min_distance: float = math.inf
    m_line: Optional[Tuple[Point, Point]] = None
    visited: Dict[Tuple[int, int, str, int], float] = field(default_factory=dict)
    left_hit: bool = False
    last_cell: Optional[Tuple[int, int]] = None
    last_side: float = 0.0
    hit_points: List[Point] = field(default_factory=list)
    hit_travel: List[float] = field(default_factory=list)
    leave_points: List[Point] = field(default_factory=list)
    loop_samples: List[Tuple[Point, float]] = field(default_factory=list)


def _distance(a: Point, b: Point) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


class BugPolicy(Policy):
    """One trial of a Bug variant.

    Args:
        variant: BUG0, BUG1 or BUG2
        rule: Side on which the obstacle is kept while following
        target: Goal point known in advance
        speed: Cruise speed in m/s, capped by the robot's max speed
        gain: Proportional gain of the standoff correction
    """

    def __init__(self, variant: BugVariant, rule: TurnRule, target: Point,
                 speed: float = DEFAULT_BUG_SPEED, gain: float = 1.0):
        self.variant = variant
        self.rule = rule
        self.target = (float(target[0]), float(target[1]))
        self.speed = speed
        self.gain = gain
        self.state = BugState()
        self.name = f"{variant.value}-{rule.value}"
        self.standoff = 0.0
        self.tolerance = 0.0

    def begin(self, obs: Observation) -> None:
        grid = obs.grid
        if grid.is_occupied_cell(*grid.world_to_cell(*self.target)):
            raise ConfigurationError(f"target ({self.target[0]:.3f}, {self.target[1]:.3f}) lies inside an obstacle")
        self.speed = min(self.speed, obs.robot.max_speed)
        self.standoff = obs.robot.footprint_radius + grid.resolution
        self.tolerance = max(2.0 * grid.resolution, 1.5 * self.speed * obs.config.sim_dt)
        self.state = BugState(m_line=(obs.pose.position, self.target))

    # -- boundary following -------------------------------------------------

    def _follow_direction(self, obs: Observation) -> float:
        grid, robot = obs.grid, obs.robot
        x, y = obs.pose.position
        side = self.rule.side
        distance, wall_bearing = grid.nearest_obstacle(x, y)
        wall_ray = raycast(grid, (x, y), wall_bearing, 3.0 * self.standoff)
        wall_distance = wall_ray.distance if wall_ray is not None else max(distance, 3.0 * self.standoff)

        error = (wall_distance - self.standoff) / self.standoff
        correction = max(-MAX_CORRECTION, min(MAX_CORRECTION, self.gain * error))
        move = wall_bearing - side * (math.pi / 2.0) + side * correction

        # Ahead ray: turn away from the wall until the way is open
        for _ in range(int(2 * math.pi / AHEAD_SWEEP)):
            if not direction_blocked(grid, robot, (x, y), move):
                break
            move -= side * AHEAD_SWEEP
        return wrap_angle(move)

    def _record(self, obs: Observation, direction: float) -> bool:
        """Track discretized states; True when a genuine revisit is detected."""
        cell = obs.grid.world_to_cell(*obs.pose.position)
        if cell == self.state.last_cell:
            return False
        self.state.last_cell = cell
        sector = int((direction % (2 * math.pi)) / (2 * math.pi) * HEADING_SECTORS) % HEADING_SECTORS
        key = (cell[0], cell[1], self.state.mode.value, sector)
        first = self.state.visited.get(key)
        if first is None:
            self.state.visited[key] = obs.distance_travelled
            return False
        # Short re-entries are jitter across a cell edge, not a circuit
        return obs.distance_travelled - first >= 4.0 * self.standoff

    def _tracks_visits(self) -> bool:
        if self.variant in (BugVariant.BUG0, BugVariant.BUG2):
            return self.state.mode is BugMode.BOUNDARY_FOLLOW
        return self.state.mode is BugMode.LOOP_RETURN

    def _side_of_m_line(self, point: Point) -> Tuple[float, float]:
        (sx, sy), (tx, ty) = self.state.m_line
        ax, ay = tx - sx, ty - sy
        bx, by = point[0] - sx, point[1] - sy
        length2 = ax * ax + ay * ay
        projection = (ax * bx + ay * by) / length2 if length2 > 0 else 0.0
        return ax * by - ay * bx, projection

    # -- mode transitions ---------------------------------------------------

    def _repeats_hit(self, obs: Observation) -> bool:
        """Bug0 back near an earlier hit point, no closer to the target, after a circuit."""
        if self.variant is not BugVariant.BUG0:
            return False
        position = obs.pose.position
        progress = obs.grid.resolution
        distance = _distance(position, self.target)
        return any(_distance(position, point) <= self.standoff
                   and distance >= _distance(point, self.target) - progress
                   and obs.distance_travelled - travelled >= 3.0 * self.standoff
                   for point, travelled in zip(self.state.hit_points, self.state.hit_travel))

    def _start_follow(self, obs: Observation) -> bool:
        """Enter boundary following; True when Bug0 is back at an old hit point."""
        position = obs.pose.position
        distance = _distance(position, self.target)
        state = self.state
        repeated = self._repeats_hit(obs)
        state.mode = BugMode.BOUNDARY_FOLLOW
        state.hit_point = position
        state.hit_distance = distance
        state.min_distance = distance
        state.min_dist_point = position
        state.left_hit = False
        state.loop_samples = [(position, distance)]
        state.last_side = self._side_of_m_line(position)[0]
        state.hit_points.append(position)
        state.hit_travel.append(obs.distance_travelled)
        # visited is per episode
        state.visited.clear()
        state.last_cell = None
        logger.debug(f"{self.name}: hit at ({position[0]:.2f}, {position[1]:.2f}), {distance:.2f} m to target")
        return repeated

    def _leave(self, obs: Observation) -> MotionCommand:
        position = obs.pose.position
        self.state.mode = BugMode.MOTION_TO_GOAL
        self.state.leave_point = position
        self.state.leave_points.append(position)
        logger.debug(f"{self.name}: leave at ({position[0]:.2f}, {position[1]:.2f})")
        return MotionCommand.toward(obs.pose.bearing_to(self.target), self.speed, obs.pose)

    def _target_open(self, obs: Observation) -> bool:
        return not direction_blocked(obs.grid, obs.robot, obs.pose.position, obs.pose.bearing_to(self.target))

    def _check_leave(self, obs: Observation) -> Union[None, MotionCommand, PolicySignal]:
        state = self.state
        position = obs.pose.position
        distance = _distance(position, self.target)
        from_hit = _distance(position, state.hit_point)
        if not state.left_hit and from_hit > 3.0 * self.tolerance:
            state.left_hit = True
        closed = state.left_hit and from_hit <= self.tolerance

        if self.variant is BugVariant.BUG0:
            bearing = obs.pose.bearing_to(self.target)
            reach = min(2.0 * self.standoff, distance)
            hit = raycast(obs.grid, position, bearing, reach)
            if hit is None and self._target_open(obs):
                return self._leave(obs)
            return None

        if self.variant is BugVariant.BUG1:
            if state.mode is BugMode.BOUNDARY_FOLLOW:
                state.loop_samples.append((position, distance))
                if distance < state.min_distance:
                    state.min_distance = distance
                    state.min_dist_point = position
                if closed:
                    if state.min_distance >= state.hit_distance - obs.grid.resolution:
                        logger.debug(f"{self.name}: loop closed without improvement")
                        return PolicySignal.LOOP_DETECTED
                    state.mode = BugMode.LOOP_RETURN
                    state.last_cell = None
                return None
            if _distance(position, state.min_dist_point) <= self.tolerance:
                if not self._target_open(obs):
                    return PolicySignal.LOOP_DETECTED
                return self._leave(obs)
            return None

        # Bug2
        side, projection = self._side_of_m_line(position)
        crossed = (state.last_side * side <= 0.0) and (state.last_side != 0.0 or side != 0.0)
        state.last_side = side
        if closed:
            logger.debug(f"{self.name}: returned to hit point, target unreachable")
            return PolicySignal.LOOP_DETECTED
        if (crossed and 0.0 <= projection <= 1.0
                and distance < state.hit_distance - obs.grid.resolution
                and self._target_open(obs)):
            return self._leave(obs)
        return None

    def act(self, obs: Observation) -> Union[MotionCommand, PolicySignal]:
        state = self.state
        if state.mode is BugMode.MOTION_TO_GOAL:
            bearing = obs.pose.bearing_to(self.target)
            if obs.halted or direction_blocked(obs.grid, obs.robot, obs.pose.position, bearing):
                if self._start_follow(obs):
                    logger.debug(f"{self.name}: hit point repeated, loop detected")
                    return PolicySignal.LOOP_DETECTED
            else:
                return MotionCommand.toward(bearing, self.speed, obs.pose)
        else:
            decision = self._check_leave(obs)
            if decision is not None:
                return decision

        move = self._follow_direction(obs)
        if self._tracks_visits() and self._record(obs, move):
            logger.debug(f"{self.name}: repeated state, loop detected")
            return PolicySignal.LOOP_DETECTED
        return MotionCommand.toward(move, self.speed, obs.pose)


POLICY_NAMES = [f"{variant.value}-{rule.value}" for variant in BugVariant for rule in TurnRule]


def bug_policy(variant: Union[BugVariant, str], rule: Union[TurnRule, str], target: Point,
               speed: float = DEFAULT_BUG_SPEED) -> BugPolicy:
    """Create a Bug policy from enums or their string values ('bug1', 'l')."""
    if isinstance(variant, str):
        variant = BugVariant(variant.lower())
    if isinstance(rule, str):
        rule = TurnRule(rule.lower()[0])
    return BugPolicy(variant, rule, target, speed)


def parse_bug_name(name: str) -> Tuple[BugVariant, TurnRule]:
    """Split a CLI name such as 'bug2-r' into variant and rule."""
    try:
        variant, rule = name.lower().split("-")
        return BugVariant(variant), TurnRule(rule)
    except ValueError:
        raise ConfigurationError(f"not a bug policy name: {name!r}")
