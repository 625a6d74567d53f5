"""
Trap detection from odometry and the proximity switch.
"""

import logging
import math
from collections import deque
from dataclasses import dataclass
from typing import Deque, Sequence, Tuple

from ..core.errors import ConfigurationError
from ..core.worldmap import Point

logger = logging.getLogger(__name__)

TIME_EPSILON = 1e-9


@dataclass(frozen=True)
class TrapConfig:
    min_travel: float = 0.2
    window: float = 5.0
    halt_duration: float = 5.0

    def __post_init__(self):
        for name in ("min_travel", "window", "halt_duration"):
            value = getattr(self, name)
            if not value > 0:
                raise ConfigurationError(f"TrapConfig.{name} must be positive, got {value}")


def _halt_run(halt_history: Sequence[Tuple[float, bool]]) -> float:
    """Start time of the trailing run of asserted halts, or inf if the last flag is clear."""
    start = math.inf
    for t, halted in reversed(halt_history):
        if not halted:
            break
        start = t
    return start


def detect_trap(odometry: Sequence[Tuple[float, Point]], halt_history: Sequence[Tuple[float, bool]],
                cfg: TrapConfig, now: float) -> bool:
    """True when the robot is trapped.

    Either the halt switch has been asserted continuously for
    ``halt_duration`` seconds, or the raw path over the last ``window``
    seconds is shorter than ``min_travel``. The travel test needs odometry
    reaching back a full window.

    Args:
        odometry: (time, position) samples in time order
        halt_history: (time, halted) flags in time order
        cfg: Thresholds
        now: Current time in seconds
    """
    if now - _halt_run(halt_history) >= cfg.halt_duration - TIME_EPSILON:
        return True

    if not odometry or odometry[0][0] > now - cfg.window + TIME_EPSILON:
        return False
    start = now - cfg.window
    # Keep the last sample at or before the window start so the window is covered exactly
    first = 0
    for index, (t, _) in enumerate(odometry):
        if t <= start + TIME_EPSILON:
            first = index
        else:
            break
    travelled = 0.0
    for (_, a), (_, b) in zip(odometry[first:], odometry[first + 1:]):
        travelled += math.hypot(b[0] - a[0], b[1] - a[1])
    return travelled < cfg.min_travel


class TrapMonitor:
    """Rolling odometry and halt buffers feeding ``detect_trap``."""

    def __init__(self, cfg: TrapConfig):
        self.cfg = cfg
        self.odometry: Deque[Tuple[float, Point]] = deque()
        self.halts: Deque[Tuple[float, bool]] = deque()

    def reset(self) -> None:
        self.odometry.clear()
        self.halts.clear()

    def record(self, t: float, position: Point, halted: bool) -> None:
        self.odometry.append((t, position))
        self.halts.append((t, halted))
        horizon = t - max(self.cfg.window, self.cfg.halt_duration) - 1.0
        # Trim but keep one sample older than the horizon
        while len(self.odometry) > 2 and self.odometry[1][0] < horizon:
            self.odometry.popleft()
        while len(self.halts) > 2 and self.halts[1][0] < horizon:
            self.halts.popleft()

    def trapped(self, now: float) -> bool:
        return detect_trap(list(self.odometry), list(self.halts), self.cfg, now)
