"""
Random walk baseline: drive straight, pick a fresh uniform heading on every halt.
"""

import logging
import math
from typing import Optional

import numpy as np

from ..core.simkernel import MotionCommand, Observation, Policy

logger = logging.getLogger(__name__)


class RandomWalkPolicy(Policy):
    """Target-agnostic walker; success only happens by passing near the goal."""

    name = "random-walk"

    def __init__(self, seed: Optional[int] = None, initial_heading: Optional[float] = None):
        self._rng = np.random.default_rng(seed) if seed is not None else None
        self._initial_heading = initial_heading
        self.heading = 0.0
        self.redraws = 0

    def _draw(self, obs: Observation) -> float:
        rng = self._rng if self._rng is not None else obs.rng
        return float(rng.uniform(-math.pi, math.pi))

    def begin(self, obs: Observation) -> None:
        if self._initial_heading is None:
            self.heading = self._draw(obs)
        else:
            self.heading = self._initial_heading

    def act(self, obs: Observation) -> MotionCommand:
        if obs.halted:
            self.heading = self._draw(obs)
            self.redraws += 1
        return MotionCommand.toward(self.heading, obs.robot.max_speed, obs.pose)


def random_walk_policy(seed: Optional[int] = None, initial_heading: Optional[float] = None) -> RandomWalkPolicy:
    """Create a random walk policy.

    Args:
        seed: Seed of the policy's own stream; the trial stream is used when None
        initial_heading: Starting direction; drawn from the stream when None
    """
    return RandomWalkPolicy(seed, initial_heading)
