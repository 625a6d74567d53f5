"""
Prompt template compiler and encoded prompt databases.

Template grammar, one template per line::

    A {} photo of a {} {}            # markers bind to descriptions, states, objects
    A photo of a {} {}               # fewer markers bind to the innermost levels
    A {desc} photo of a {object}     # named markers pick levels explicitly
    A photo with no context|texture|information
    A photo of a (brown bear|teddy bear) on a desk

A whitespace-delimited word containing ``|`` expands in place to one prompt
per alternative, so ``brown|toy bear`` alternates "brown" and "toy" only.
Parentheses around a run containing ``|`` make each alternative a whole
phrase. Word-list entries always split on ``|`` as whole phrases, so
``bear|teddy bear`` offers "bear" and "teddy bear".
"""

import base64
import itertools
import logging
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..core.errors import ConfigurationError, DimensionMismatchError, ProviderError, TemplateParseError
from ..core.sections import Entry, parse_sections
from .embedding import EmbeddingProvider

logger = logging.getLogger(__name__)

TEMPLATE_SECTIONS = ("templates", "descriptions", "states", "objects", "positive", "negative")
SLOT_ORDER = ("descriptions", "states", "objects")
SLOT_NAMES = {
    "": None,
    "desc": "descriptions",
    "description": "descriptions",
    "state": "states",
    "object": "objects",
}
DB_HEADER = "promptdb v1"
LITERAL_TOKEN = re.compile(r"\((?P<phrases>[^()]*\|[^()]*)\)|\S+")


class Polarity(Enum):
    POSITIVE = "positive"
    NEGATIVE = "negative"


def _as_entries(items: Iterable[Union[str, Entry]]) -> Tuple[Entry, ...]:
    return tuple(item if isinstance(item, Entry) else Entry(str(item), 0, 1) for item in items)


@dataclass(frozen=True)
class TemplateSpec:
    """Parsed prompt hierarchy. Plain strings are accepted in place of entries."""

    top_level: Tuple[Entry, ...] = ()
    descriptions: Tuple[Entry, ...] = ()
    states: Tuple[Entry, ...] = ()
    objects: Tuple[Entry, ...] = ()
    raw_prompts: Tuple[Entry, ...] = ()
    negative: Tuple[Entry, ...] = ()

    def __post_init__(self):
        for name in ("top_level", "descriptions", "states", "objects", "raw_prompts", "negative"):
            object.__setattr__(self, name, _as_entries(getattr(self, name)))


@dataclass(frozen=True)
class PromptSet:
    positive: Tuple[str, ...]
    negative: Tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "positive", tuple(dict.fromkeys(self.positive)))
        object.__setattr__(self, "negative", tuple(dict.fromkeys(self.negative)))
        if not self.positive and not self.negative:
            raise ConfigurationError("a prompt set needs at least one prompt")


# -- template expansion -------------------------------------------------------

def _split_alternatives(text: str, line: int, column: int) -> List[str]:
    alternatives = text.split("|")
    offset = 0
    for alternative in alternatives:
        if not alternative.strip():
            raise TemplateParseError(f"empty alternative in {text!r}", line, column + offset)
        offset += len(alternative) + 1
    return [alternative.strip() for alternative in alternatives]


def _literal_groups(text: str, line: int, column: int) -> List[List[str]]:
    groups = []
    for match in LITERAL_TOKEN.finditer(text):
        if match.group("phrases") is not None:
            groups.append(_split_alternatives(match.group("phrases"), line, column + match.start("phrases")))
        elif "|" in match.group(0):
            groups.append(_split_alternatives(match.group(0), line, column + match.start()))
        else:
            groups.append([match.group(0)])
    return groups


def parse_template(entry: Entry) -> List[Union[str, List[List[str]]]]:
    """Split a template into marker slot names and literal word groups.

    Returns:
        list: Items are either a slot list name (``'states'``) or a list of
        alternative groups for a literal run of text
    """
    text, line, column = entry.text, entry.line, entry.column
    parts: List[Union[str, int, List[List[str]]]] = []
    positional = 0
    cursor = 0
    while cursor < len(text):
        opening = text.find("{", cursor)
        closing = text.find("}", cursor)
        if closing >= 0 and (opening < 0 or closing < opening):
            raise TemplateParseError("unbalanced '}'", line, column + closing)
        if opening < 0:
            parts.append(_literal_groups(text[cursor:], line, column + cursor))
            break
        if opening > cursor:
            parts.append(_literal_groups(text[cursor:opening], line, column + cursor))
        closing = text.find("}", opening)
        nested = text.find("{", opening + 1)
        if closing < 0 or (0 <= nested < closing):
            raise TemplateParseError("unbalanced '{'", line, column + opening)
        name = text[opening + 1:closing].strip().lower()
        if name not in SLOT_NAMES:
            raise TemplateParseError(f"unknown marker {{{name}}}", line, column + opening)
        slot = SLOT_NAMES[name]
        if slot is None:
            if positional >= len(SLOT_ORDER):
                raise TemplateParseError("more than three insertion markers", line, column + opening)
            positional += 1
            slot = positional
        parts.append(slot)
        cursor = closing + 1

    # m bare markers bind to the innermost m levels: '{} {}' is state, object
    skipped = len(SLOT_ORDER) - positional
    return [SLOT_ORDER[skipped + part - 1] if isinstance(part, int) else part for part in parts]


def _word_list(entries: Sequence[Entry]) -> List[str]:
    if not entries:
        return [""]
    words: List[str] = []
    for entry in entries:
        words.extend(_split_alternatives(entry.text, entry.line, entry.column))
    return words


def _clean(text: str) -> str:
    return " ".join(text.split())


def expand_entry(entry: Entry, spec: TemplateSpec) -> List[str]:
    """All prompts of one template line, in slot-list then alternative order."""
    parts = parse_template(entry)
    slots = [_word_list(getattr(spec, part)) for part in parts if isinstance(part, str)]
    literals = [group for part in parts if not isinstance(part, str) for group in part]

    prompts = []
    for slot_values in itertools.product(*slots):
        for literal_values in itertools.product(*literals):
            slot_iter = iter(slot_values)
            literal_iter = iter(literal_values)
            pieces = []
            for part in parts:
                if isinstance(part, str):
                    pieces.append(next(slot_iter))
                else:
                    pieces.extend(next(literal_iter) for _ in part)
            prompts.append(_clean(" ".join(pieces)))
    return prompts


def _expand_all(entries: Sequence[Entry], spec: TemplateSpec) -> List[str]:
    prompts: List[str] = []
    for entry in entries:
        prompts.extend(expand_entry(entry, spec))
    return list(dict.fromkeys(p for p in prompts if p))


def expand_templates(spec: TemplateSpec) -> List[str]:
    """Expand top-level templates and raw prompts into positive prompt strings.

    Output order follows template order; duplicates keep their first position.
    """
    return _expand_all(spec.top_level + spec.raw_prompts, spec)


def compile_prompt_set(spec: TemplateSpec) -> PromptSet:
    return PromptSet(tuple(expand_templates(spec)), tuple(_expand_all(spec.negative, spec)))


def parse_template_spec(text: str) -> TemplateSpec:
    sections = parse_sections(text, TEMPLATE_SECTIONS)
    spec = TemplateSpec(
        top_level=sections.get("templates", []),
        descriptions=sections.get("descriptions", []),
        states=sections.get("states", []),
        objects=sections.get("objects", []),
        raw_prompts=sections.get("positive", []),
        negative=sections.get("negative", []),
    )
    # Surface template syntax errors at load time
    for entry in spec.top_level + spec.raw_prompts + spec.negative:
        parse_template(entry)
    return spec


def load_template_spec(path: str) -> TemplateSpec:
    with open(path, "r", encoding="utf-8") as handle:
        return parse_template_spec(handle.read())


# -- encoded databases --------------------------------------------------------

@dataclass(frozen=True)
class PromptEntry:
    embedding: np.ndarray
    polarity: Polarity
    source_text: str


@dataclass(frozen=True)
class EncodedPromptDB:
    """Immutable list of encoded prompts with stacked per-polarity matrices."""

    dimension: int
    entries: Tuple[PromptEntry, ...]
    positive_matrix: np.ndarray = field(init=False, repr=False, compare=False)
    negative_matrix: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        for entry in self.entries:
            if entry.embedding.shape != (self.dimension,):
                raise DimensionMismatchError(
                    f"entry {entry.source_text!r} has shape {entry.embedding.shape}, expected ({self.dimension},)")
        for polarity, name in ((Polarity.POSITIVE, "positive_matrix"), (Polarity.NEGATIVE, "negative_matrix")):
            rows = [e.embedding for e in self.entries if e.polarity is polarity]
            matrix = np.vstack(rows) if rows else np.zeros((0, self.dimension))
            matrix.setflags(write=False)
            object.__setattr__(self, name, matrix)

    def __len__(self):
        return len(self.entries)

    def counts(self) -> Tuple[int, int]:
        return len(self.positive_matrix), len(self.negative_matrix)

    def dumps(self) -> str:
        lines = [f"{DB_HEADER} D={self.dimension}"]
        for entry in self.entries:
            packed = base64.b64encode(entry.embedding.astype("<f4").tobytes()).decode("ascii")
            lines.append(f"{entry.polarity.value} {packed} {entry.source_text}")
        return "\n".join(lines) + "\n"

    def save(self, path: str) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as handle:
            handle.write(self.dumps())

    @classmethod
    def loads(cls, text: str) -> "EncodedPromptDB":
        lines = text.splitlines()
        if not lines or not lines[0].startswith(DB_HEADER + " D="):
            raise ConfigurationError(f"missing '{DB_HEADER} D=<dim>' header")
        try:
            dimension = int(lines[0].split("D=", 1)[1])
        except ValueError:
            raise ConfigurationError(f"bad dimension in header: {lines[0]!r}")
        entries = []
        for number, line in enumerate(lines[1:], start=2):
            if not line.strip():
                continue
            parts = line.split(" ", 2)
            if len(parts) < 2:
                raise ConfigurationError(f"line {number}: expected '<polarity> <vector> <text>'")
            try:
                polarity = Polarity(parts[0])
                vector = np.frombuffer(base64.b64decode(parts[1]), dtype="<f4").astype(float)
            except (ValueError, TypeError) as e:
                raise ConfigurationError(f"line {number}: {e}")
            entries.append(PromptEntry(vector, polarity, parts[2] if len(parts) > 2 else ""))
        return cls(dimension, tuple(entries))

    @classmethod
    def load(cls, path: str) -> "EncodedPromptDB":
        with open(path, "r", encoding="utf-8") as handle:
            return cls.loads(handle.read())


def build_db(prompts: PromptSet, provider: EmbeddingProvider) -> EncodedPromptDB:
    """Encode every prompt, positives first, preserving input order.

    Raises:
        ProviderError: When the provider fails; the error names the prompt
    """
    if provider.dimension <= 0:
        raise ConfigurationError(f"provider dimension must be positive, got {provider.dimension}")
    entries = []
    for polarity, texts in ((Polarity.POSITIVE, prompts.positive), (Polarity.NEGATIVE, prompts.negative)):
        for text in texts:
            try:
                vector = np.asarray(provider.encode(text), dtype=float)
            except ProviderError:
                raise
            except Exception as e:
                raise ProviderError(text, str(e))
            if vector.shape != (provider.dimension,):
                raise ProviderError(text, f"expected {provider.dimension} values, got shape {vector.shape}")
            entries.append(PromptEntry(vector, polarity, text))
    db = EncodedPromptDB(provider.dimension, tuple(entries))
    logger.debug(f"Built prompt DB with {len(db)} entries {db.counts()}")
    return db


def db_from_texts(positive: Sequence[str], negative: Sequence[str], provider: EmbeddingProvider,
                  spec: Optional[TemplateSpec] = None) -> EncodedPromptDB:
    """Expand template lines against optional word lists and encode them."""
    base = spec or TemplateSpec()
    expanded = TemplateSpec(top_level=positive, descriptions=base.descriptions, states=base.states,
                            objects=base.objects, negative=negative)
    return build_db(compile_prompt_set(expanded), provider)
