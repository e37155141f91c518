"""Categorical linguistic property database and set-based similarity.

Properties are grouped per language into two classes, ``syntactic`` and
``phonological``. A vendored snapshot (WALS-derived feature flags in the
URIEL naming style) ships with the package; see :func:`builtin_db_path`.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Optional

__all__ = [
    "PropertySet",
    "TypologyDB",
    "TypologyParseError",
    "PROPERTY_CLASSES",
    "load_typology_db",
    "iou_similarity",
    "builtin_db_path",
]

PROPERTY_CLASSES = ("syntactic", "phonological")

# A property set is just a frozenset of property identifier strings.
PropertySet = frozenset


class TypologyParseError(ValueError):
    """A typology TSV row that does not match the expected contract."""


@dataclass(frozen=True)
class TypologyDB:
    """Immutable map from (language, property class) to a property set."""

    entries: dict[tuple[str, str], frozenset[str]]

    def get(self, language: str, prop_class: str) -> Optional[frozenset[str]]:
        """Property set for a language and class, or None when unknown."""
        if prop_class not in PROPERTY_CLASSES:
            raise ValueError(f"unknown property class {prop_class!r}")
        return self.entries.get((language, prop_class))

    @property
    def languages(self) -> set[str]:
        return {lang for lang, _ in self.entries}


def load_typology_db(path: str | Path) -> TypologyDB:
    """Load a TSV of ``lang \\t class \\t property`` rows.

    Lines starting with ``#`` and blank lines are ignored. Duplicate rows
    merge into one set. Malformed rows raise :class:`TypologyParseError`
    with the offending line number.
    """
    path = Path(path)
    entries: dict[tuple[str, str], set[str]] = {}
    with path.open(encoding="utf-8") as handle:
        for lineno, raw in enumerate(handle, start=1):
            line = raw.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) != 3:
                raise TypologyParseError(
                    f"{path}:{lineno}: expected 3 tab-separated columns, "
                    f"got {len(fields)}"
                )
            lang, prop_class, prop = (f.strip() for f in fields)
            if prop_class not in PROPERTY_CLASSES:
                raise TypologyParseError(
                    f"{path}:{lineno}: unknown property class {prop_class!r} "
                    f"(expected one of {PROPERTY_CLASSES})"
                )
            if not lang or not prop:
                raise TypologyParseError(
                    f"{path}:{lineno}: language and property must be non-empty"
                )
            entries.setdefault((lang, prop_class), set()).add(prop)
    return TypologyDB(entries={key: frozenset(v) for key, v in entries.items()})


def iou_similarity(
    a: frozenset[str] | set[str],
    b: frozenset[str] | set[str],
    empty_value: float = 0.0,
) -> float:
    """Intersection over union of two property sets, in [0, 1].

    When both sets are empty there is no evidence either way; the
    configured ``empty_value`` (default 0) is returned with a warning.
    """
    union = len(a | b)
    if union == 0:
        warnings.warn(
            "intersection-over-union of two empty property sets; "
            f"returning {empty_value}",
            stacklevel=2,
        )
        return empty_value
    return len(a & b) / union


def builtin_db_path() -> Path:
    """Path of the vendored typology snapshot shipped with the package."""
    return Path(resources.files("langxfer").joinpath("data/wals_properties.tsv"))
