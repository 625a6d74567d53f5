"""
Vision-vision familiarity database.

Each entry is a known spot: a running average of the tile embeddings merged
into it. Queries return the best cosine match; updates either merge the new
embedding into that match or store it as a new spot.
"""

import base64
import logging
import threading
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Tuple

import numpy as np

from ..core.errors import ConfigurationError, DimensionMismatchError
from ..language.embedding import normalize

logger = logging.getLogger(__name__)

DEFAULT_KNOWN_THRESHOLD = 0.85
DEFAULT_DECAY = 0.1
SNAPSHOT_HEADER = "familiarity v1"


class MergeStrategy(Enum):
    COUNT_AVERAGE = "count"
    ROLLING_AVERAGE = "rolling"


@dataclass(frozen=True)
class FamiliarityConfig:
    """Merge policy of the familiarity database.

    Args:
        threshold: Similarity above which an embedding merges into a known spot
        strategy: COUNT_AVERAGE (running mean) or ROLLING_AVERAGE (decay)
        decay: Rolling-average factor lambda in (0, 1)
    """

    threshold: float = DEFAULT_KNOWN_THRESHOLD
    strategy: MergeStrategy = MergeStrategy.ROLLING_AVERAGE
    decay: float = DEFAULT_DECAY

    def __post_init__(self):
        problems = []
        if not -1.0 <= self.threshold < 1.0:
            problems.append(f"threshold must lie in [-1, 1), got {self.threshold}")
        if not 0.0 < self.decay < 1.0:
            problems.append(f"decay must lie in (0, 1), got {self.decay}")
        if isinstance(self.strategy, str):
            object.__setattr__(self, "strategy", MergeStrategy(self.strategy))
        if problems:
            raise ConfigurationError("invalid familiarity configuration", problems)


@dataclass
class FamiliarityEntry:
    """A known spot. ``raw`` is the un-normalized running average."""

    raw: np.ndarray
    merge_count: int = 1
    vector: np.ndarray = field(init=False)

    def __post_init__(self):
        self.raw = np.asarray(self.raw, dtype=float)
        self.vector = normalize(self.raw)

    def merge(self, incoming: np.ndarray, strategy: MergeStrategy, decay: float) -> None:
        if strategy is MergeStrategy.COUNT_AVERAGE:
            s = self.merge_count
            self.raw = s / (s + 1.0) * self.raw + 1.0 / (s + 1.0) * incoming
        else:
            self.raw = (1.0 - decay) * self.raw + decay * incoming
        self.merge_count += 1
        self.vector = normalize(self.raw)


class FamiliarityDB:
    """Single-writer store of known spots, scanned linearly."""

    def __init__(self, dimension: int, config: Optional[FamiliarityConfig] = None):
        if dimension <= 0:
            raise ConfigurationError(f"dimension must be positive, got {dimension}")
        self.dimension = dimension
        self.config = config or FamiliarityConfig()
        self.entries: List[FamiliarityEntry] = []
        self._matrix: Optional[np.ndarray] = None
        self._lock = threading.Lock()

    def __len__(self):
        return len(self.entries)

    def _check(self, embedding: np.ndarray) -> np.ndarray:
        embedding = np.asarray(embedding, dtype=float)
        if embedding.shape != (self.dimension,):
            raise DimensionMismatchError(
                f"embedding has shape {embedding.shape}, familiarity DB expects ({self.dimension},)")
        return embedding

    def _vectors(self) -> np.ndarray:
        if self._matrix is None:
            self._matrix = np.vstack([entry.vector for entry in self.entries])
        return self._matrix

    def query(self, embedding: np.ndarray) -> Tuple[float, Optional[int]]:
        """Best cosine match and its index; (0.0, None) on an empty DB."""
        embedding = self._check(embedding)
        if not self.entries:
            return 0.0, None
        similarities = self._vectors() @ embedding
        best = int(np.argmax(similarities))
        return float(similarities[best]), best

    def update(self, embedding: np.ndarray, score: float, index: Optional[int]) -> None:
        """Merge into entry ``index`` when ``score`` clears the threshold, else insert."""
        embedding = self._check(embedding)
        with self._lock:
            if index is not None and score > self.config.threshold:
                self.entries[index].merge(embedding, self.config.strategy, self.config.decay)
            else:
                self.entries.append(FamiliarityEntry(embedding.copy()))
            self._matrix = None

    def query_update(self, embedding: np.ndarray) -> float:
        """Return the pre-merge familiarity score in [0, 1] and record the embedding."""
        score, index = self.query(embedding)
        self.update(embedding, score, index)
        return min(max(score, 0.0), 1.0)

    def familiarity(self, embedding: np.ndarray) -> float:
        """Read-only familiarity score in [0, 1]."""
        score, _ = self.query(embedding)
        return min(max(score, 0.0), 1.0)

    def dumps(self) -> str:
        cfg = self.config
        lines = [f"{SNAPSHOT_HEADER} D={self.dimension} threshold={cfg.threshold!r} "
                 f"strategy={cfg.strategy.value} lambda={cfg.decay!r}"]
        for entry in self.entries:
            packed = base64.b64encode(entry.raw.astype("<f8").tobytes()).decode("ascii")
            lines.append(f"entry {packed} {entry.merge_count} {cfg.strategy.value}")
        return "\n".join(lines) + "\n"

    def save(self, path: str) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as handle:
            handle.write(self.dumps())

    @classmethod
    def loads(cls, text: str) -> "FamiliarityDB":
        lines = text.splitlines()
        if not lines or not lines[0].startswith(SNAPSHOT_HEADER + " "):
            raise ConfigurationError(f"missing '{SNAPSHOT_HEADER}' header")
        try:
            fields = dict(item.split("=", 1) for item in lines[0].split()[2:])
            config = FamiliarityConfig(float(fields["threshold"]), MergeStrategy(fields["strategy"]),
                                       float(fields["lambda"]))
            db = cls(int(fields["D"]), config)
        except (KeyError, ValueError) as e:
            raise ConfigurationError(f"bad familiarity header {lines[0]!r}: {e}")
        for number, line in enumerate(lines[1:], start=2):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 4 or parts[0] != "entry":
                raise ConfigurationError(f"line {number}: expected 'entry <vector> <s> <strategy>'")
            raw = np.frombuffer(base64.b64decode(parts[1]), dtype="<f8").astype(float)
            db.entries.append(FamiliarityEntry(db._check(raw), int(parts[2])))
        return db

    @classmethod
    def load(cls, path: str) -> "FamiliarityDB":
        with open(path, "r", encoding="utf-8") as handle:
            return cls.loads(handle.read())
