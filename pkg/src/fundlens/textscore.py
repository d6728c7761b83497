"""Dictionary-based text scoring.

Dictionaries map categories to word lists; a trailing ``*`` marks a stem that
matches any token it prefixes.  Scores are the percentage of tokens matching
each category, the same counting rule word-category text analyzers use.  The
dictionaries themselves are user-supplied; the package bundles a small anger
example and illustrative "best"/"innovate" synonym lists for the blurb
variables (not the proprietary originals).
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .errors import DictionaryFormatError

_TOKEN_RE = re.compile(r"(?:[^\W\d_]|')+")


@dataclass(frozen=True)
class Dictionary:
    name: str
    categories: dict[str, list[str]]  # category -> lowercase patterns

    def __post_init__(self):
        for cat, patterns in self.categories.items():
            for p in patterns:
                if "*" in p[:-1]:
                    raise ValueError(f"category {cat}: interior wildcard in '{p}'")
                if p != p.lower():
                    raise ValueError(f"category {cat}: pattern '{p}' not lowercase")


@dataclass(frozen=True)
class TextScores:
    word_count: int
    percentages: dict[str, float]  # category -> [0, 100]
    empty: bool = field(default=False)


def parse_dictionary(path) -> Dictionary:
    """Parse a dictionary file: ``name: w1, w2, ...`` per line, ``#`` comments.

    Raises DictionaryFormatError (with the line number) on duplicate
    categories, interior wildcards, or empty categories.
    """
    categories: dict[str, list[str]] = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if ":" not in line:
                raise DictionaryFormatError(line_no, f"expected 'name: words', got '{line}'")
            name, _, rest = line.partition(":")
            name = name.strip().lower()
            if not name:
                raise DictionaryFormatError(line_no, "empty category name")
            if name in categories:
                raise DictionaryFormatError(line_no, f"duplicate category '{name}'")
            patterns = [w.strip().lower() for w in rest.split(",") if w.strip()]
            if not patterns:
                raise DictionaryFormatError(line_no, f"category '{name}' has no words")
            for p in patterns:
                if "*" in p[:-1]:
                    raise DictionaryFormatError(
                        line_no, f"interior wildcard in pattern '{p}'"
                    )
            categories[name] = patterns
    import os

    return Dictionary(name=os.path.splitext(os.path.basename(str(path)))[0],
                      categories=categories)


def tokenize(text: str) -> list[str]:
    """Lowercased maximal runs of letters and apostrophes; everything else
    separates tokens."""
    return _TOKEN_RE.findall(text.lower())


def _matches(token: str, patterns: list[str]) -> bool:
    for p in patterns:
        if p.endswith("*"):
            if token.startswith(p[:-1]):
                return True
        elif token == p:
            return True
    return False


def score_text(text: str, dictionary: Dictionary) -> TextScores:
    """Percentage of tokens matching each category (bag-of-words)."""
    tokens = tokenize(text)
    n = len(tokens)
    if n == 0:
        return TextScores(
            word_count=0,
            percentages={cat: 0.0 for cat in dictionary.categories},
            empty=True,
        )
    percentages = {}
    for cat, patterns in dictionary.categories.items():
        hits = sum(1 for t in tokens if _matches(t, patterns))
        percentages[cat] = 100.0 * hits / n
    return TextScores(word_count=n, percentages=percentages)
