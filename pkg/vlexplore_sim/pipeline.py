"""
VL-Explore policy: perception, middleware and decision wired into one
kernel policy so it runs through the same trial harness as the baselines.
"""

import csv
import logging
from dataclasses import dataclass, field, replace
from typing import List, Optional, Tuple, Union

import numpy as np

from .core.errors import DimensionMismatchError
from .core.simkernel import MotionCommand, Observation, Policy, PolicySignal
from .core.worldmap import Pose
from .decision.look_around import HeadingCandidate, look_around
from .decision.mixer import column_utilities
from .decision.modes import DecisionConfig, ModeInputs, ModeState, NavMode, step_mode
from .decision.trap import TrapMonitor
from .language.embedding import DEFAULT_DIMENSION, EmbeddingProvider, HashEmbeddingProvider
from .language.promptdb import EncodedPromptDB, TemplateSpec, build_db, compile_prompt_set
from .middleware.correlation import GRID_SHAPE, ScoreGrid, correlate, score_frame
from .middleware.familiarity import FamiliarityConfig, FamiliarityDB
from .perception.scene import DEFAULT_NOISE_STD, SceneEmbedder, observe_frame, observe_tile
from .perception.slicer import TileColumn, TileLayout, TileRow, slice_fov

logger = logging.getLogger(__name__)

DEFAULT_TARGET = "teddy bear"
FROZEN_FAMILIARITY = 0.5
DECISION_LOG_HEADER = ["t", "mode", "u_L", "u_C", "u_R", "trap", "target_max"]


def default_nav_prompts() -> TemplateSpec:
    return TemplateSpec(
        top_level=["floor", "A photo of a {desc} floor"],
        descriptions=["clear|open|empty|walkable"],
        negative=["wall", "A photo of a blocked|close wall"],
    )


def default_target_prompts(target_description: str) -> TemplateSpec:
    return TemplateSpec(
        top_level=[target_description, "A photo of a {} {}"],
        states=["brown|toy"],
        objects=[target_description],
        negative=["A photo of a chair|box|table|plant|shelf"],
    )


@dataclass(frozen=True)
class VlExploreConfig:
    """Composition of the VL-Explore stack.

    Args:
        layout: Tile slicing of the field of view
        target_description: Text naming the mission target
        nav_prompts: Navigability template spec; defaults to floor/wall prompts
        target_prompts: Target template spec; defaults to prompts built around
            ``target_description``
        nav_db: Prebuilt navigability DB, overrides ``nav_prompts``
        target_db: Prebuilt target DB, overrides ``target_prompts``
        familiarity: Familiarity merge policy
        decision: Mixer, trap, look-around and target-lock settings
        noise_std: Embedding noise of the synthetic camera
        embedder_seed: Seed of the embedder's depth-profile projection
        look_around_enabled: False reproduces the look-around ablation
        fixed_familiarity: A constant replaces the familiarity middleware
        dimension: Embedding size of the default provider
    """

    layout: TileLayout = field(default_factory=TileLayout)
    target_description: str = DEFAULT_TARGET
    nav_prompts: Optional[TemplateSpec] = None
    target_prompts: Optional[TemplateSpec] = None
    nav_db: Optional[EncodedPromptDB] = None
    target_db: Optional[EncodedPromptDB] = None
    familiarity: FamiliarityConfig = field(default_factory=FamiliarityConfig)
    decision: DecisionConfig = field(default_factory=DecisionConfig)
    noise_std: float = DEFAULT_NOISE_STD
    embedder_seed: int = 0
    look_around_enabled: bool = True
    fixed_familiarity: Optional[float] = None
    dimension: int = DEFAULT_DIMENSION

    def ablated(self, no_look_around: bool = False, no_familiarity: bool = False) -> "VlExploreConfig":
        """Copy with middlewares disabled the way the ablation runs do it."""
        return replace(self,
                       look_around_enabled=self.look_around_enabled and not no_look_around,
                       fixed_familiarity=FROZEN_FAMILIARITY if no_familiarity else self.fixed_familiarity)


class VlExplorePolicy(Policy):
    """One VL-Explore mission.

    Args:
        cfg: Stack configuration
        provider: Text encoder; a deterministic hash provider by default
    """

    name = "vl-explore"

    def __init__(self, cfg: Optional[VlExploreConfig] = None, provider: Optional[EmbeddingProvider] = None):
        self.cfg = cfg or VlExploreConfig()
        self.provider = provider or HashEmbeddingProvider(self.cfg.dimension)
        self.nav_db = self.cfg.nav_db or build_db(
            compile_prompt_set(self.cfg.nav_prompts or default_nav_prompts()), self.provider)
        self.target_db = self.cfg.target_db or build_db(
            compile_prompt_set(self.cfg.target_prompts or default_target_prompts(self.cfg.target_description)),
            self.provider)
        self.embedder = SceneEmbedder.from_provider(self.provider, self.cfg.target_description,
                                                    noise_std=self.cfg.noise_std, seed=self.cfg.embedder_seed)
        for label, db in (("navigability", self.nav_db), ("target", self.target_db)):
            if db.dimension != self.embedder.dimension:
                raise DimensionMismatchError(
                    f"{label} prompt DB has D={db.dimension}, scene embedder has D={self.embedder.dimension}")
        if self.cfg.look_around_enabled is False:
            self.name = "vl-explore-no-look-around"
        if self.cfg.fixed_familiarity is not None:
            self.name = "vl-explore-no-familiarity" if self.cfg.look_around_enabled else "vl-explore-ablated"
        self.decision = self.cfg.decision
        self.fam_db = FamiliarityDB(self.embedder.dimension, self.cfg.familiarity)
        self.state = ModeState()
        self.monitor = TrapMonitor(self.decision.trap)
        self.decision_log: List[List[str]] = []
        self.scans: List[Tuple[float, Pose, List[HeadingCandidate]]] = []
        self._navigate_since: Optional[float] = None

    def begin(self, obs: Observation) -> None:
        self.decision = replace(self.cfg.decision,
                                turn_rate=min(self.cfg.decision.turn_rate, obs.robot.max_turn_rate))
        self.fam_db = FamiliarityDB(self.embedder.dimension, self.cfg.familiarity)
        self.state = ModeState()
        self.monitor = TrapMonitor(self.decision.trap)
        self.decision_log = []
        self.scans = []
        self._navigate_since = None

    # -- look-around ------------------------------------------------------------

    def _heading_scorer(self, obs: Observation, embeddings: List[np.ndarray]):
        x, y = obs.pose.position
        near = int(TileRow.NEAR) * 3 + int(TileColumn.CENTER)
        far = int(TileRow.FAR) * 3 + int(TileColumn.CENTER)
        center = int(TileColumn.CENTER)

        def score_heading(theta: float) -> float:
            sectors = slice_fov(self.cfg.layout, Pose(x, y, theta))
            nav = np.zeros(GRID_SHAPE)
            fam = np.zeros(GRID_SHAPE)
            std = np.zeros(GRID_SHAPE)
            for index in (near, far):
                tile = observe_tile(obs.grid, obs.target, sectors[index], self.embedder, obs.rng)
                row, col = tile.tile_index
                nav[row, col] = correlate(tile.embedding, self.nav_db)
                std[row, col] = tile.std_dev
                if self.cfg.fixed_familiarity is not None:
                    fam[row, col] = self.cfg.fixed_familiarity
                else:
                    fam[row, col] = self.fam_db.familiarity(tile.embedding)
                if index == far:
                    embeddings.append(tile.embedding)
            grid = ScoreGrid(nav, np.zeros(GRID_SHAPE), fam, std)
            return float(column_utilities(grid, self.decision.mixer)[center])

        return score_heading

    def _scan(self, obs: Observation):
        def run(trap_recovery_from: Optional[float]) -> List[HeadingCandidate]:
            embeddings: List[np.ndarray] = []
            candidates = look_around(obs.pose.heading, self._heading_scorer(obs, embeddings),
                                     self.decision.look_around, trap_recovery_from)
            # Familiarity is read against the scan-start DB and merged afterwards
            if self.cfg.fixed_familiarity is None:
                for embedding in embeddings:
                    self.fam_db.query_update(embedding)
            self.scans.append((obs.time, obs.pose, candidates))
            return candidates

        return run

    # -- per step -----------------------------------------------------------------

    def act(self, obs: Observation) -> Union[MotionCommand, PolicySignal]:
        observations = observe_frame(obs.grid, obs.target, obs.pose, self.cfg.layout, self.embedder, obs.rng)
        fam_db = None if self.cfg.fixed_familiarity is not None else self.fam_db
        scores = score_frame(observations, self.nav_db, self.target_db, fam_db, self.cfg.fixed_familiarity)

        trapped = False
        if self.state.mode is NavMode.NAVIGATE:
            if self.state.navigate_since != self._navigate_since:
                # Trap window starts when Navigate is (re-)entered
                self._navigate_since = self.state.navigate_since
                self.monitor.reset()
            self.monitor.record(obs.time, obs.pose.position, obs.halted)
            trapped = self.monitor.trapped(obs.time)

        inputs = ModeInputs(
            time=obs.time,
            dt=obs.config.sim_dt,
            pose=obs.pose,
            scores=scores,
            trapped=trapped,
            goal_reached=obs.pose.distance_to(obs.target) <= obs.config.goal_radius,
            look_around=self._scan(obs) if self.cfg.look_around_enabled else None,
        )
        mode, command = step_mode(self.state, inputs, self.decision)

        utilities = column_utilities(scores, self.decision.mixer)
        self.decision_log.append([f"{obs.time:.3f}", mode.value] + [f"{u:.6f}" for u in utilities]
                                 + [str(int(trapped)), f"{scores.target_max:.6f}"])
        if mode is NavMode.FAILED:
            logger.debug(f"{self.name}: failed ({self.state.failure.value}) at t={obs.time:.1f}")
            return PolicySignal.STUCK
        return command

    def write_decision_log(self, path: str) -> None:
        with open(path, "w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(DECISION_LOG_HEADER)
            writer.writerows(self.decision_log)


def vl_explore_policy(cfg: Optional[VlExploreConfig] = None,
                      provider: Optional[EmbeddingProvider] = None) -> VlExplorePolicy:
    return VlExplorePolicy(cfg, provider)
