"""
Navigation mode machine: look-around, basic navigation and target lock.

``step_mode`` is called once per kernel step. It mutates a ``ModeState``,
validates every transition against ``ALLOWED_TRANSITIONS`` and returns the
new mode with the command to execute.
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, FrozenSet, List, Optional, Tuple

from ..core.errors import ConfigurationError, IllegalTransitionError
from ..core.simkernel import STOP, MotionCommand
from ..core.worldmap import Pose, wrap_angle
from ..middleware.correlation import ScoreGrid
from ..perception.slicer import TileColumn
from .look_around import HeadingCandidate, LookAroundConfig
from .mixer import MixerConfig, mix_motion
from .trap import TrapConfig

logger = logging.getLogger(__name__)

SPIN_TOLERANCE = 1e-6
ALIGN_TOLERANCE = 1e-3
MAX_EMPTY_RECOVERY_SCANS = 2


class NavMode(Enum):
    INIT = "Init"
    LOOK_AROUND = "LookAround"
    NAVIGATE = "Navigate"
    TARGET_LOCK = "TargetLock"
    TRAPPED = "Trapped"
    DONE = "Done"
    FAILED = "Failed"

    @property
    def terminal(self) -> bool:
        return self in (NavMode.DONE, NavMode.FAILED)


ALLOWED_TRANSITIONS: Dict[NavMode, FrozenSet[NavMode]] = {
    NavMode.INIT: frozenset({NavMode.LOOK_AROUND, NavMode.NAVIGATE, NavMode.TARGET_LOCK, NavMode.FAILED}),
    NavMode.LOOK_AROUND: frozenset({NavMode.LOOK_AROUND, NavMode.NAVIGATE, NavMode.TARGET_LOCK, NavMode.FAILED}),
    NavMode.NAVIGATE: frozenset({NavMode.NAVIGATE, NavMode.TRAPPED, NavMode.TARGET_LOCK, NavMode.FAILED}),
    NavMode.TRAPPED: frozenset({NavMode.LOOK_AROUND, NavMode.TARGET_LOCK, NavMode.FAILED}),
    NavMode.TARGET_LOCK: frozenset({NavMode.TARGET_LOCK, NavMode.NAVIGATE, NavMode.DONE, NavMode.FAILED}),
    NavMode.DONE: frozenset({NavMode.DONE}),
    NavMode.FAILED: frozenset({NavMode.FAILED}),
}


class FailureReason(Enum):
    STUCK = "stuck"
    DISTANCE_LIMIT = "distance_limit"


@dataclass(frozen=True)
class DecisionConfig:
    """Everything the mode machine needs besides per-step inputs.

    Args:
        mixer: Motion mixer weights
        trap: Trap thresholds
        look_around: Heading scan parameters
        tau_target: Target score that engages target lock
        t_loss: Seconds below ``tau_target`` before the target counts as lost
        turn_rate: Spin rate during look-around, rad/s
        lock_turn_rate: Yaw rate toward a side column in target lock, rad/s
    """

    mixer: MixerConfig = field(default_factory=MixerConfig)
    trap: TrapConfig = field(default_factory=TrapConfig)
    look_around: LookAroundConfig = field(default_factory=LookAroundConfig)
    tau_target: float = 0.3
    t_loss: float = 2.0
    turn_rate: float = math.pi
    lock_turn_rate: float = math.radians(30.0)

    def __post_init__(self):
        problems = []
        if not -1.0 < self.tau_target < 1.0:
            problems.append(f"tau_target must lie in (-1, 1), got {self.tau_target}")
        if not self.t_loss > 0:
            problems.append(f"t_loss must be positive, got {self.t_loss}")
        if not self.turn_rate > 0:
            problems.append(f"turn_rate must be positive, got {self.turn_rate}")
        if not self.lock_turn_rate > 0:
            problems.append(f"lock_turn_rate must be positive, got {self.lock_turn_rate}")
        if problems:
            raise ConfigurationError("invalid decision configuration", problems)


ScanFunction = Callable[[Optional[float]], List[HeadingCandidate]]


@dataclass
class ModeInputs:
    """Per-step inputs to the mode machine.

    ``look_around`` runs a heading scan from the current spot given the
    optional trap heading. None disables look-around altogether: the mission
    starts straight in Navigate and a trap fails the run as stuck.
    """

    time: float
    dt: float
    pose: Pose
    scores: Optional[ScoreGrid] = None
    trapped: bool = False
    goal_reached: bool = False
    distance_limit_exceeded: bool = False
    look_around: Optional[ScanFunction] = None


@dataclass
class ModeState:
    mode: NavMode = NavMode.INIT
    spun: float = 0.0
    last_heading: Optional[float] = None
    align_heading: Optional[float] = None
    trap_anchor: Optional[float] = None
    candidates: List[HeadingCandidate] = field(default_factory=list)
    empty_recovery_scans: int = 0
    last_target_seen: float = -math.inf
    last_lock_command: MotionCommand = STOP
    navigate_since: Optional[float] = None
    failure: Optional[FailureReason] = None
    transitions: List[Tuple[float, NavMode, NavMode]] = field(default_factory=list)


def transition(state: ModeState, new_mode: NavMode, time: float) -> None:
    if new_mode not in ALLOWED_TRANSITIONS[state.mode]:
        raise IllegalTransitionError(f"illegal mode transition {state.mode.value} -> {new_mode.value}")
    if new_mode is not state.mode:
        logger.debug(f"t={time:.2f}: {state.mode.value} -> {new_mode.value}")
        state.transitions.append((time, state.mode, new_mode))
    state.mode = new_mode
    if new_mode is NavMode.NAVIGATE:
        state.navigate_since = time


def _begin_scan(state: ModeState, inputs: ModeInputs, anchor: Optional[float]) -> None:
    state.spun = 0.0
    state.last_heading = inputs.pose.heading
    state.align_heading = None
    state.trap_anchor = anchor
    state.candidates = []


def _spin_command(state: ModeState, inputs: ModeInputs, cfg: DecisionConfig) -> MotionCommand:
    remaining = 2.0 * math.pi - state.spun
    return MotionCommand(yaw_rate=min(cfg.turn_rate, remaining / inputs.dt))


def _align_command(state: ModeState, inputs: ModeInputs, cfg: DecisionConfig) -> MotionCommand:
    error = wrap_angle(state.align_heading - inputs.pose.heading)
    rate = max(-cfg.turn_rate, min(cfg.turn_rate, error / inputs.dt))
    return MotionCommand(yaw_rate=rate)


def _finish_scan(state: ModeState, inputs: ModeInputs) -> Optional[FailureReason]:
    heading = inputs.pose.heading
    state.candidates = inputs.look_around(state.trap_anchor)
    if state.candidates:
        state.align_heading = state.candidates[0].heading
        if state.trap_anchor is not None:
            state.empty_recovery_scans = 0
        return None

    if state.trap_anchor is not None:
        state.empty_recovery_scans += 1
        if state.empty_recovery_scans >= MAX_EMPTY_RECOVERY_SCANS:
            return FailureReason.STUCK
    state.align_heading = wrap_angle(heading + math.pi)
    return None


def _lock_command(scores: ScoreGrid, cfg: DecisionConfig) -> MotionCommand:
    _, col = scores.target_argmax
    if col == TileColumn.CENTER:
        return MotionCommand(surge=cfg.mixer.forward_speed)
    side = 1.0 if col == TileColumn.LEFT else -1.0
    return MotionCommand(yaw_rate=side * cfg.lock_turn_rate)


def _navigate_command(state: ModeState, inputs: ModeInputs, cfg: DecisionConfig) -> MotionCommand:
    if inputs.scores is None:
        return STOP
    return mix_motion(inputs.scores, cfg.mixer)


def step_mode(state: ModeState, inputs: ModeInputs, cfg: DecisionConfig) -> Tuple[NavMode, MotionCommand]:
    """Advance the mode machine by one step.

    Target lock preempts every non-terminal mode while the best tile target
    score exceeds ``tau_target``. Look-around only ever emits yaw commands.

    Returns:
        tuple: (mode after the step, command for this step)

    Raises:
        IllegalTransitionError: When an edge outside ``ALLOWED_TRANSITIONS``
            is requested, which indicates a bug
    """
    now = inputs.time
    if state.mode.terminal:
        return state.mode, STOP

    if inputs.distance_limit_exceeded:
        state.failure = FailureReason.DISTANCE_LIMIT
        transition(state, NavMode.FAILED, now)
        return state.mode, STOP

    scores = inputs.scores
    target_seen = scores is not None and scores.target_max > cfg.tau_target
    if target_seen:
        state.last_target_seen = now
        if state.mode is not NavMode.TARGET_LOCK:
            transition(state, NavMode.TARGET_LOCK, now)

    if state.mode is NavMode.TARGET_LOCK:
        if inputs.goal_reached:
            transition(state, NavMode.DONE, now)
            return state.mode, STOP
        if target_seen:
            state.last_lock_command = _lock_command(scores, cfg)
            return state.mode, state.last_lock_command
        if now - state.last_target_seen >= cfg.t_loss:
            transition(state, NavMode.NAVIGATE, now)
            return state.mode, _navigate_command(state, inputs, cfg)
        return state.mode, state.last_lock_command

    if state.mode is NavMode.INIT:
        if inputs.look_around is None:
            transition(state, NavMode.NAVIGATE, now)
            return state.mode, _navigate_command(state, inputs, cfg)
        transition(state, NavMode.LOOK_AROUND, now)
        _begin_scan(state, inputs, None)
        return state.mode, _spin_command(state, inputs, cfg)

    if state.mode is NavMode.TRAPPED:
        transition(state, NavMode.LOOK_AROUND, now)
        _begin_scan(state, inputs, state.trap_anchor)
        return state.mode, _spin_command(state, inputs, cfg)

    if state.mode is NavMode.LOOK_AROUND:
        if state.align_heading is None:
            state.spun += abs(wrap_angle(inputs.pose.heading - state.last_heading))
            state.last_heading = inputs.pose.heading
            if state.spun < 2.0 * math.pi - SPIN_TOLERANCE:
                return state.mode, _spin_command(state, inputs, cfg)
            failure = _finish_scan(state, inputs)
            if failure is not None:
                state.failure = failure
                transition(state, NavMode.FAILED, now)
                return state.mode, STOP
        if abs(wrap_angle(state.align_heading - inputs.pose.heading)) > ALIGN_TOLERANCE:
            return state.mode, _align_command(state, inputs, cfg)
        transition(state, NavMode.NAVIGATE, now)
        return state.mode, _navigate_command(state, inputs, cfg)

    # Navigate
    if inputs.trapped and inputs.look_around is None:
        state.failure = FailureReason.STUCK
        transition(state, NavMode.FAILED, now)
        return state.mode, STOP
    if inputs.trapped:
        transition(state, NavMode.TRAPPED, now)
        state.trap_anchor = inputs.pose.heading
        return state.mode, STOP
    return state.mode, _navigate_command(state, inputs, cfg)
