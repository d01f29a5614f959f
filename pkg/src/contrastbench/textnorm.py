"""Text normalization and tokenization shared by corpus, lexicon, and matcher."""
from __future__ import annotations

import re
import unicodedata

# Letters and digits; underscore and hyphen act as token boundaries.
_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


def normalize_text(text: str) -> str:
    """Lowercase, NFC-compose, and collapse runs of whitespace. Idempotent."""
    text = unicodedata.normalize("NFC", text).lower()
    # Lowercasing can reintroduce decomposed sequences (e.g. dotted capital I).
    text = unicodedata.normalize("NFC", text)
    return " ".join(text.split())


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text)


def token_spans(text: str) -> list[tuple[str, int, int]]:
    """Tokens with (start, end) character offsets into `text`."""
    return [(m.group(0), m.start(), m.end()) for m in _TOKEN_RE.finditer(text)]


def normalize_lemma(text: str) -> str:
    """Canonical lemma form: normalized, tokenized, single-space joined.

    Underscores and hyphens become word boundaries, so "motor_car" and
    "motor-car" both normalize to "motor car".
    """
    return " ".join(tokenize(normalize_text(text)))


def singularize(token: str) -> str | None:
    """Strip a plural suffix, or None if no rule applies.

    Deliberately minimal: "-es" after a sibilant-ish stem, otherwise "-s".
    No irregular-form table.
    """
    if token.endswith("es") and len(token) > 3:
        stem = token[:-2]
        if stem.endswith(("s", "x", "z", "ch", "sh")):
            return stem
    if token.endswith("s") and not token.endswith("ss") and len(token) > 3:
        return token[:-1]
    return None
