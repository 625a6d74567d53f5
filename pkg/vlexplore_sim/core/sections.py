"""
Line-oriented section file parser.

Both prompt template files and experiment spec files use this format::

    # comment
    [section]
    entry text            # trailing comment
    key value

Entries keep their source line and column so later stages can report parse
errors at the exact location.
"""

import logging
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Tuple

from .errors import SectionParseError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Entry:
    """One non-empty, comment-stripped line of a section file."""

    text: str
    line: int
    column: int

    def key_value(self) -> Tuple[str, str]:
        """Split the entry into its first word and the remainder."""
        parts = self.text.split(None, 1)
        if len(parts) == 1:
            return parts[0], ""
        return parts[0], parts[1].strip()


def _strip_comment(raw: str) -> str:
    index = raw.find("#")
    if index < 0:
        return raw
    return raw[:index]


def parse_sections(text: str, allowed: Optional[Iterable[str]] = None) -> Dict[str, List[Entry]]:
    """Parse section file text into ``{section: [Entry, ...]}``.

    Args:
        text: Full file contents
        allowed: Optional set of section names; anything else is an error

    Returns:
        dict: Entries per section in file order. Sections that appear with no
        entries map to an empty list.

    Raises:
        SectionParseError: On malformed headers, unknown or repeated sections,
            or entries before the first header
    """
    allowed_set = set(allowed) if allowed is not None else None
    sections: Dict[str, List[Entry]] = {}
    current: Optional[str] = None

    for line_no, raw in enumerate(text.splitlines(), start=1):
        content = _strip_comment(raw).rstrip()
        stripped = content.strip()
        if not stripped:
            continue
        column = len(content) - len(content.lstrip()) + 1

        if stripped.startswith("["):
            if not stripped.endswith("]"):
                raise SectionParseError("unterminated section header", line_no, column)
            name = stripped[1:-1].strip().lower()
            if not name:
                raise SectionParseError("empty section name", line_no, column)
            if allowed_set is not None and name not in allowed_set:
                raise SectionParseError(f"unknown section [{name}]", line_no, column + 1)
            if name in sections:
                raise SectionParseError(f"section [{name}] repeated", line_no, column + 1)
            sections[name] = []
            current = name
            continue

        if current is None:
            raise SectionParseError("entry outside of any section", line_no, column)
        sections[current].append(Entry(stripped, line_no, column))

    logger.debug(f"Parsed sections: {sorted(sections)}")
    return sections


def read_sections(path: str, allowed: Optional[Iterable[str]] = None) -> Dict[str, List[Entry]]:
    """Read and parse a section file from disk."""
    with open(path, "r", encoding="utf-8") as handle:
        return parse_sections(handle.read(), allowed)
