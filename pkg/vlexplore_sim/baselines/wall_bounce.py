"""
Wall bounce baseline: specular reflection about the contact normal.
"""

import logging
import math
from typing import Tuple

from ..core.simkernel import MotionCommand, Observation, Policy, direction_blocked
from ..core.worldmap import raycast

logger = logging.getLogger(__name__)

FALLBACK_STEP = math.radians(10.0)
FALLBACK_TRIES = 36


def reflect(direction: Tuple[float, float], normal: Tuple[float, float]) -> Tuple[float, float]:
    """Reflect d about unit normal n: d' = d - 2 (d . n) n."""
    dot = direction[0] * normal[0] + direction[1] * normal[1]
    return direction[0] - 2.0 * dot * normal[0], direction[1] - 2.0 * dot * normal[1]


class WallBouncePolicy(Policy):
    name = "wall-bounce"

    def __init__(self, initial_heading: float = 0.0):
        self.heading = initial_heading
        self.bounces = 0

    def _bounce(self, obs: Observation) -> None:
        grid, robot = obs.grid, obs.robot
        position = obs.pose.position
        reach = grid.diagonal
        hit = raycast(grid, position, self.heading, reach)
        if hit is not None:
            dx, dy = reflect((math.cos(self.heading), math.sin(self.heading)), hit.normal)
            self.heading = math.atan2(dy, dx)
        # Inner corners can leave the reflected ray blocked; sweep clockwise
        for _ in range(FALLBACK_TRIES):
            if not direction_blocked(grid, robot, position, self.heading):
                break
            self.heading -= FALLBACK_STEP
        self.bounces += 1

    def act(self, obs: Observation) -> MotionCommand:
        if obs.halted:
            self._bounce(obs)
        return MotionCommand.toward(self.heading, obs.robot.max_speed, obs.pose)


def wall_bounce_policy(initial_heading: float = 0.0) -> WallBouncePolicy:
    return WallBouncePolicy(initial_heading)
