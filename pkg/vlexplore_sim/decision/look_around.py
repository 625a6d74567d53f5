"""
Look-around: score a full turn of headings and pick where to go next.
"""

import csv
import logging
import math
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence

import numpy as np
from scipy.ndimage import gaussian_filter1d

from ..core.errors import ConfigurationError
from ..core.worldmap import wrap_angle

logger = logging.getLogger(__name__)

DEGENERATE_RANGE = 1e-6
CANDIDATE_CSV_HEADER = ["heading_rad", "score", "arc_width"]


@dataclass(frozen=True)
class LookAroundConfig:
    """Sampling and smoothing of the heading scan.

    Args:
        angular_step: Heading spacing; must divide a full turn
        smoothing_sigma: Width of the circular Gaussian smoothing, radians
        deviation_reward: Bonus k for turning away from the trap heading
    """

    angular_step: float = 2.0 * math.pi / 72
    smoothing_sigma: float = math.radians(15.0)
    deviation_reward: float = 0.3

    def __post_init__(self):
        problems = []
        if not self.angular_step > 0:
            problems.append(f"angular_step must be positive, got {self.angular_step}")
        else:
            count = 2.0 * math.pi / self.angular_step
            if abs(count - round(count)) * self.angular_step > 1e-9:
                problems.append(f"angular_step {self.angular_step} does not divide a full turn")
        if not self.smoothing_sigma > 0:
            problems.append(f"smoothing_sigma must be positive, got {self.smoothing_sigma}")
        if self.deviation_reward < 0:
            problems.append(f"deviation_reward must be non-negative, got {self.deviation_reward}")
        if problems:
            raise ConfigurationError("invalid look-around configuration", problems)

    @property
    def sample_count(self) -> int:
        return int(round(2.0 * math.pi / self.angular_step))

    def headings(self) -> np.ndarray:
        return np.arange(self.sample_count) * self.angular_step


@dataclass(frozen=True)
class HeadingCandidate:
    heading: float
    score: float
    arc_width: float


def _arc_width(raw: np.ndarray, index: int, step: float) -> float:
    """Angular width of the run of positive raw scores around ``index``."""
    count = len(raw)
    positive = raw > 0.0
    if positive.all():
        return 2.0 * math.pi
    if not positive[index]:
        return step
    width = 1
    i = (index - 1) % count
    while positive[i]:
        width += 1
        i = (i - 1) % count
    i = (index + 1) % count
    while positive[i]:
        width += 1
        i = (i + 1) % count
    return width * step


def smooth_scores(raw: Sequence[float], cfg: LookAroundConfig,
                  trap_recovery_from: Optional[float] = None) -> np.ndarray:
    """Circular Gaussian smoothing plus the optional deviation reward."""
    raw = np.asarray(raw, dtype=float)
    smoothed = gaussian_filter1d(raw, sigma=cfg.smoothing_sigma / cfg.angular_step, mode="wrap")
    if trap_recovery_from is not None:
        deviation = np.abs((cfg.headings() - trap_recovery_from + math.pi) % (2.0 * math.pi) - math.pi)
        smoothed = smoothed + cfg.deviation_reward * deviation / math.pi
    return smoothed


def select_candidates(raw: Sequence[float], cfg: LookAroundConfig, current_heading: float = 0.0,
                      trap_recovery_from: Optional[float] = None) -> List[HeadingCandidate]:
    """Candidates from one turn of raw heading scores.

    Raw sample ``i`` belongs to heading ``i * angular_step``. Candidates are
    positive local maxima of the smoothed sequence, best first; equal scores
    prefer the wider free arc, then the lower index. A flat sequence yields
    at most one candidate, at the current heading.
    """
    raw = np.asarray(raw, dtype=float)
    if len(raw) != cfg.sample_count:
        raise ConfigurationError(f"expected {cfg.sample_count} heading scores, got {len(raw)}")
    smoothed = smooth_scores(raw, cfg, trap_recovery_from)
    step = cfg.angular_step

    if smoothed.max() - smoothed.min() < DEGENERATE_RANGE:
        index = int(round((current_heading % (2.0 * math.pi)) / step)) % len(raw)
        score = float(smoothed[index])
        if score <= 0.0:
            return []
        return [HeadingCandidate(wrap_angle(current_heading), score, _arc_width(raw, index, step))]

    previous = np.roll(smoothed, 1)
    following = np.roll(smoothed, -1)
    peaks = np.flatnonzero((smoothed > previous) & (smoothed >= following) & (smoothed > 0.0))
    ranked = sorted(peaks, key=lambda i: (-smoothed[i], -_arc_width(raw, i, step), i))
    return [HeadingCandidate(wrap_angle(i * step), float(smoothed[i]), _arc_width(raw, i, step)) for i in ranked]


def look_around(current_heading: float, score_heading: Callable[[float], float], cfg: LookAroundConfig,
                trap_recovery_from: Optional[float] = None) -> List[HeadingCandidate]:
    """Score every sampled heading with ``score_heading`` and rank the candidates.

    Args:
        current_heading: Heading at the start of the scan
        score_heading: Raw score of facing a world heading from the current spot
        cfg: Sampling and smoothing parameters
        trap_recovery_from: Heading the robot was trapped at, if recovering
    """
    raw = np.array([score_heading(float(theta)) for theta in cfg.headings()])
    candidates = select_candidates(raw, cfg, current_heading, trap_recovery_from)
    logger.debug(f"Look-around: {len(candidates)} candidates"
                 + (f", best {candidates[0].heading:.3f} rad ({candidates[0].score:.3f})" if candidates else ""))
    return candidates


def write_candidates_csv(candidates: Sequence[HeadingCandidate], path: str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(CANDIDATE_CSV_HEADER)
        for candidate in candidates:
            writer.writerow([f"{candidate.heading:.6f}", f"{candidate.score:.6f}", f"{candidate.arc_width:.6f}"])
