"""
Embedding providers and vector helpers.

Only a deterministic bag-of-words provider ships with the package; any object
with ``dimension`` and ``encode`` satisfies ``EmbeddingProvider``.
"""

import hashlib
import logging
import re
import threading
from typing import Dict

import numpy as np
from typing_extensions import Protocol, runtime_checkable

from ..core.errors import DimensionMismatchError, ProviderError

logger = logging.getLogger(__name__)

DEFAULT_DIMENSION = 512
UNIT_TOLERANCE = 1e-9

STOPWORDS = frozenset({"a", "an", "the", "of", "with", "photo", "picture", "image", "in", "on",
                       "this", "there", "is"})
_TOKEN = re.compile(r"[a-z0-9]+")


@runtime_checkable
class EmbeddingProvider(Protocol):
    """Text encoder contract: same text, same unit vector."""

    dimension: int

    def encode(self, text: str) -> np.ndarray:
        ...


def normalize(vector: np.ndarray) -> np.ndarray:
    """Unit-normalize; the zero vector is returned unchanged."""
    vector = np.asarray(vector, dtype=float)
    norm = np.linalg.norm(vector)
    if norm == 0.0:
        return vector
    return vector / norm


def check_dimension(vector: np.ndarray, dimension: int) -> None:
    if vector.shape != (dimension,):
        raise DimensionMismatchError(f"expected a {dimension}-dimensional vector, got shape {vector.shape}")


def tokenize(text: str) -> list:
    return [token for token in _TOKEN.findall(text.lower()) if token not in STOPWORDS]


class HashEmbeddingProvider:
    """Deterministic bag-of-words encoder.

    Every content word maps to a fixed Gaussian vector seeded from a BLAKE2b
    digest of the word and the provider seed; a text encodes to the
    normalized sum of its word vectors. Texts sharing content words are
    therefore correlated ("floor" and "a clear floor"), which is what the
    correlation middleware needs from a stand-in for a real text encoder.

    Args:
        dimension: Embedding size D
        seed: Namespace for the word vectors
    """

    def __init__(self, dimension: int = DEFAULT_DIMENSION, seed: int = 0):
        if dimension <= 0:
            raise ProviderError("", f"dimension must be positive, got {dimension}")
        self.dimension = dimension
        self.seed = seed
        self._words: Dict[str, np.ndarray] = {}
        self._lock = threading.Lock()

    def _word_vector(self, word: str) -> np.ndarray:
        with self._lock:
            cached = self._words.get(word)
            if cached is None:
                digest = hashlib.blake2b(f"{self.seed}:{word}".encode("utf-8"), digest_size=8).digest()
                rng = np.random.default_rng(int.from_bytes(digest, "little"))
                cached = rng.standard_normal(self.dimension)
                self._words[word] = cached
            return cached

    def encode(self, text: str) -> np.ndarray:
        words = tokenize(text)
        if not words:
            # Text made only of stopwords still needs a stable vector
            words = [text.strip().lower() or "<empty>"]
        total = np.zeros(self.dimension)
        for word in words:
            total += self._word_vector(word)
        vector = normalize(total)
        if not np.isfinite(vector).all() or np.linalg.norm(vector) == 0.0:
            raise ProviderError(text, "encoder produced a degenerate vector")
        return vector
