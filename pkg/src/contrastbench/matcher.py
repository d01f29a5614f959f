"""Caption-to-synset matching and the caption-level candidate filters.

Matching is a greedy longest-phrase-first scan over whitespace/punctuation
tokens. Morphology is plural stripping only; anything fancier would make the
match set harder to audit.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .textnorm import normalize_text, singularize, token_spans

Span = tuple[int, int]


@dataclass(frozen=True)
class LemmaMatch:
    synset_id: str
    lemma: str
    span: Span


@dataclass(frozen=True)
class MatchResult:
    record_id: int | None
    matched: tuple[LemmaMatch, ...]

    def synset_ids(self) -> set[str]:
        return {m.synset_id for m in self.matched}


class LemmaIndex:
    """Normalized lemma -> sorted synset ids, with phrase-length metadata."""

    def __init__(self, mapping: Mapping[str, Iterable[str]]):
        self._mapping: dict[str, tuple[str, ...]] = {
            lemma: tuple(sorted(set(ids))) for lemma, ids in mapping.items()
        }
        self.max_phrase_len = max((len(lemma.split()) for lemma in self._mapping), default=0)

    @classmethod
    def from_graph(cls, graph) -> "LemmaIndex":
        mapping: dict[str, set[str]] = {}
        for synset_id in graph.synset_ids():
            for lemma in graph.synset(synset_id).lemmas:
                mapping.setdefault(lemma, set()).add(synset_id)
        return cls(mapping)

    @classmethod
    def from_class_lemmas(cls, class_lemmas: Mapping[str, Iterable[str]]) -> "LemmaIndex":
        mapping: dict[str, set[str]] = {}
        for class_id, lemmas in class_lemmas.items():
            for lemma in lemmas:
                mapping.setdefault(lemma, set()).add(class_id)
        return cls(mapping)

    def __len__(self) -> int:
        return len(self._mapping)

    def __contains__(self, lemma: str) -> bool:
        return lemma in self._mapping

    def lookup(self, phrase: str) -> tuple[str, ...]:
        return self._mapping.get(phrase, ())

    def lookup_tokens(self, tokens: Sequence[str]) -> tuple[str, tuple[str, ...]] | None:
        """Resolve a token window to (index lemma, ids), trying a singular
        form of the last token when the exact phrase misses."""
        phrase = " ".join(tokens)
        ids = self.lookup(phrase)
        if ids:
            return phrase, ids
        singular = singularize(tokens[-1])
        if singular is not None:
            phrase = " ".join((*tokens[:-1], singular))
            ids = self.lookup(phrase)
            if ids:
                return phrase, ids
        return None


def extract_synsets(caption: str, index: LemmaIndex, record_id: int | None = None) -> MatchResult:
    """Find every candidate synset mentioned in a normalized caption.

    Longest phrase wins at each position and the scan advances past it, so
    nested lemmas are never double counted. A matched lemma contributes every
    synset containing it; sense disambiguation happens later via gloss
    similarity.
    """
    spans = token_spans(caption)
    matches: list[LemmaMatch] = []
    i = 0
    n = len(spans)
    while i < n:
        hit = None
        for k in range(min(index.max_phrase_len, n - i), 0, -1):
            window = [spans[j][0] for j in range(i, i + k)]
            hit = index.lookup_tokens(window)
            if hit is not None:
                lemma, ids = hit
                span = (spans[i][1], spans[i + k - 1][2])
                matches.extend(LemmaMatch(sid, lemma, span) for sid in ids)
                i += k
                break
        if hit is None:
            i += 1
    return MatchResult(record_id=record_id, matched=tuple(matches))


def remove_reference_overlap(candidates: Iterable[str], reference, graph) -> set[str]:
    """Drop candidates that equal a reference synset or share any lemma with one."""
    reference = list(reference)
    reference_ids = {r.synset_id for r in reference}
    reference_lemmas: set[str] = set()
    for r in reference:
        reference_lemmas.update(r.lemmas)
    kept = set()
    for synset_id in candidates:
        if synset_id in reference_ids:
            continue
        if set(graph.synset(synset_id).lemmas) & reference_lemmas:
            continue
        kept.add(synset_id)
    return kept


def exclusive_caption_filter(records, class_lemmas: Mapping[str, Iterable[str]]) -> dict[str, list]:
    """Assign each caption to a class only if it matches exactly one class.

    `class_lemmas` maps class id -> lemma set of the surviving candidate
    classes. Captions matching zero or multiple classes are dropped.
    """
    index = LemmaIndex.from_class_lemmas(class_lemmas)
    assigned: dict[str, list] = {class_id: [] for class_id in class_lemmas}
    for record in records:
        caption = normalize_text(record.caption)
        matched = extract_synsets(caption, index).synset_ids()
        if len(matched) == 1:
            assigned[next(iter(matched))].append(record)
    return assigned
