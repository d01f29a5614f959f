"""Quantify how different two datasets are in embedding space.

Similarity distributions (intra/inter class), per-class gloss-similarity
quantiles, a structure summary table with ratios, and a linear-probe
distinguishability test. All sampling is seed-deterministic: the same seed
yields byte-identical reports.
"""
from __future__ import annotations

import math
import random
import statistics
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .embeddings import EmbeddingStore, similarity
from .errors import ValidationError
from .lexicon import SubtreeStats
from .pipeline import DatasetManifest

DEFAULT_PAIR_CAP = 50_000


class InsufficientSamples(ValidationError):
    pass


class DimMismatch(ValidationError):
    pass


def render_rows(rows: Iterable[Sequence], header: Sequence[str], csv: bool = False) -> str:
    """Line-delimited table for external plotting; `csv` switches the delimiter."""
    sep = "," if csv else "\t"
    lines = [sep.join(header)]
    for row in rows:
        lines.append(sep.join(repr(v) if isinstance(v, float) else str(v) for v in row))
    return "\n".join(lines) + "\n"


def _subsampled_pairs(n: int, cap: int, rng: random.Random) -> list[tuple[int, int]]:
    total = n * (n - 1) // 2
    if total <= cap:
        return [(i, j) for i in range(n) for j in range(i + 1, n)]
    chosen: set[tuple[int, int]] = set()
    while len(chosen) < cap:
        i = rng.randrange(n)
        j = rng.randrange(n)
        if i == j:
            continue
        chosen.add((min(i, j), max(i, j)))
    return sorted(chosen)


@dataclass(frozen=True)
class ClassSimilarity:
    synset_id: str
    mean: float | None  # None when undefined (singleton class)
    pair_count: int


@dataclass(frozen=True)
class SimilarityReport:
    rows: tuple[ClassSimilarity, ...]
    minimum: float | None
    median: float | None
    maximum: float | None
    warnings: tuple[str, ...] = ()


def _summarize(values: list[float]) -> tuple[float | None, float | None, float | None]:
    if not values:
        return None, None, None
    return min(values), float(statistics.median(values)), max(values)


def intra_class_similarity(
    manifest: DatasetManifest,
    images: EmbeddingStore,
    pair_cap: int = DEFAULT_PAIR_CAP,
    seed: int = 0,
) -> SimilarityReport:
    """Mean pairwise image similarity inside each class.

    A singleton class has no pairs; it is reported as undefined, never 0.
    """
    rows = []
    warnings = []
    for cls in manifest.classes:
        ids = sorted({*cls.train_ids(), *cls.test_ids()})
        if len(ids) < 2:
            rows.append(ClassSimilarity(cls.synset_id, None, 0))
            warnings.append(f"class {cls.synset_id} has fewer than 2 images; intra undefined")
            continue
        rng = random.Random(f"{seed}:{cls.synset_id}")
        pairs = _subsampled_pairs(len(ids), pair_cap, rng)
        total = sum(similarity(images.vector(ids[i]), images.vector(ids[j])) for i, j in pairs)
        rows.append(ClassSimilarity(cls.synset_id, total / len(pairs), len(pairs)))
    defined = [r.mean for r in rows if r.mean is not None]
    minimum, median, maximum = _summarize(defined)
    return SimilarityReport(
        rows=tuple(rows),
        minimum=minimum,
        median=median,
        maximum=maximum,
        warnings=tuple(warnings),
    )


@dataclass(frozen=True)
class ClassPairSimilarity:
    synset_a: str
    synset_b: str
    mean: float
    pair_count: int


@dataclass(frozen=True)
class InterClassReport:
    rows: tuple[ClassPairSimilarity, ...]
    minimum: float | None
    median: float | None
    maximum: float | None


def inter_class_similarity(
    manifest: DatasetManifest,
    images: EmbeddingStore,
    max_class_pairs: int = 1000,
    pair_cap: int = DEFAULT_PAIR_CAP,
    seed: int = 0,
) -> InterClassReport:
    """Cross-pair mean image similarity for sampled class pairs."""
    class_ids = [cls.synset_id for cls in manifest.classes]
    images_of = {
        cls.synset_id: sorted({*cls.train_ids(), *cls.test_ids()}) for cls in manifest.classes
    }
    all_pairs = [
        (class_ids[i], class_ids[j])
        for i in range(len(class_ids))
        for j in range(i + 1, len(class_ids))
    ]
    rng = random.Random(seed)
    if len(all_pairs) > max_class_pairs:
        all_pairs = sorted(rng.sample(all_pairs, max_class_pairs))
    rows = []
    for synset_a, synset_b in all_pairs:
        ids_a, ids_b = images_of[synset_a], images_of[synset_b]
        cross = [(i, j) for i in range(len(ids_a)) for j in range(len(ids_b))]
        if len(cross) > pair_cap:
            cross = sorted(rng.sample(cross, pair_cap))
        total = sum(
            similarity(images.vector(ids_a[i]), images.vector(ids_b[j])) for i, j in cross
        )
        rows.append(ClassPairSimilarity(synset_a, synset_b, total / len(cross), len(cross)))
    minimum, median, maximum = _summarize([r.mean for r in rows])
    return InterClassReport(rows=tuple(rows), minimum=minimum, median=median, maximum=maximum)


@dataclass(frozen=True)
class GlossQuantiles:
    synset_id: str
    minimum: float
    q25: float
    median: float
    q75: float
    maximum: float
    count: int


def _quantile(sorted_values: list[float], q: float) -> float:
    """Linear interpolation between order statistics."""
    if len(sorted_values) == 1:
        return sorted_values[0]
    position = q * (len(sorted_values) - 1)
    low = math.floor(position)
    high = math.ceil(position)
    if low == high:
        return sorted_values[low]
    weight = position - low
    return sorted_values[low] * (1 - weight) + sorted_values[high] * weight


def gloss_similarity_report(source) -> tuple[tuple[GlossQuantiles, ...], tuple[str, ...]]:
    """Per-class gloss-similarity quantiles, plot-ready.

    Accepts a DatasetManifest (per-pair sims) or an iterable of candidates
    carrying gloss_sims. Classes without sims are excluded with a warning.
    """
    per_class: list[tuple[str, list[float]]] = []
    if isinstance(source, DatasetManifest):
        for cls in source.classes:
            per_class.append((cls.synset_id, [p.gloss_sim for p in cls.pairs]))
    else:
        for candidate in source:
            per_class.append((candidate.synset_id, list(candidate.gloss_sims)))
    rows = []
    warnings = []
    for synset_id, sims in per_class:
        if not sims:
            warnings.append(f"class {synset_id} has no gloss similarities; excluded")
            continue
        ordered = sorted(sims)
        rows.append(
            GlossQuantiles(
                synset_id=synset_id,
                minimum=ordered[0],
                q25=_quantile(ordered, 0.25),
                median=_quantile(ordered, 0.50),
                q75=_quantile(ordered, 0.75),
                maximum=ordered[-1],
                count=len(ordered),
            )
        )
    return tuple(rows), tuple(warnings)


@dataclass(frozen=True)
class ProbeResult:
    mean_accuracy: float
    std_accuracy: float
    per_trial: tuple[float, ...]
    n_per_class: int


def _train_linear_probe(
    x: np.ndarray, y: np.ndarray, epochs: int, learning_rate: float
) -> np.ndarray:
    """Full-batch gradient descent on logistic loss; labels in {-1, +1}."""
    features = np.hstack([x, np.ones((x.shape[0], 1))])
    weights = np.zeros(features.shape[1])
    for _ in range(epochs):
        margins = y * (features @ weights)
        sigma = 1.0 / (1.0 + np.exp(np.clip(margins, -30, 30)))
        gradient = -(features * (y * sigma)[:, None]).mean(axis=0)
        weights -= learning_rate * gradient
    return weights


def _probe_accuracy(x: np.ndarray, y: np.ndarray, weights: np.ndarray) -> float:
    features = np.hstack([x, np.ones((x.shape[0], 1))])
    predictions = np.where(features @ weights >= 0, 1.0, -1.0)
    return float((predictions == y).mean())


def distinguishability(
    store_a: EmbeddingStore,
    store_b: EmbeddingStore,
    n_per_class: int,
    trials: int,
    seed: int = 0,
    n_test_per_class: int = 100,
    epochs: int = 300,
    learning_rate: float = 1.0,
) -> ProbeResult:
    """Train a linear probe to tell the two stores apart.

    Per trial (fresh seed each): sample n_per_class vectors from each store
    for training, n_test_per_class held-out vectors for evaluation. The two
    sides sample independently, so passing the same store twice measures
    chance level.
    """
    if store_a.dim != store_b.dim:
        raise DimMismatch(f"store dims differ: {store_a.dim} vs {store_b.dim}")
    needed = n_per_class + n_test_per_class
    for label, store in (("a", store_a), ("b", store_b)):
        if len(store) < needed:
            raise InsufficientSamples(
                f"store {label} has {len(store)} vectors, needs {needed}"
            )
    accuracies = []
    for trial in range(trials):
        rng = random.Random(f"{seed}:{trial}")
        if store_a is store_b:
            # Same pool on both sides: partition one disjoint sample so no
            # vector carries both labels (chance level stays measurable).
            if len(store_a) < 2 * needed:
                raise InsufficientSamples(
                    f"store has {len(store_a)} vectors, needs {2 * needed} for a split"
                )
            combined = rng.sample(store_a.ids(), 2 * needed)
            sample_a, sample_b = combined[:needed], combined[needed:]
        else:
            sample_a = rng.sample(store_a.ids(), needed)
            sample_b = rng.sample(store_b.ids(), needed)
        train_x = np.stack(
            [store_a.vector(i) for i in sample_a[:n_per_class]]
            + [store_b.vector(i) for i in sample_b[:n_per_class]]
        ).astype(np.float64)
        train_y = np.concatenate([np.ones(n_per_class), -np.ones(n_per_class)])
        test_x = np.stack(
            [store_a.vector(i) for i in sample_a[n_per_class:]]
            + [store_b.vector(i) for i in sample_b[n_per_class:]]
        ).astype(np.float64)
        test_y = np.concatenate([np.ones(n_test_per_class), -np.ones(n_test_per_class)])
        weights = _train_linear_probe(train_x, train_y, epochs, learning_rate)
        accuracies.append(_probe_accuracy(test_x, test_y, weights))
    mean = sum(accuracies) / len(accuracies)
    variance = sum((a - mean) ** 2 for a in accuracies) / len(accuracies)
    return ProbeResult(
        mean_accuracy=mean,
        std_accuracy=math.sqrt(variance),
        per_trial=tuple(accuracies),
        n_per_class=n_per_class,
    )


SUMMARY_ROWS = (
    ("nodes", "node_count"),
    ("edges", "edge_count"),
    ("min_depth", "min_depth"),
    ("median_depth", "median_depth"),
    ("max_depth", "max_depth"),
    ("density", "density"),
    ("modularity", "modularity"),
    ("synset_overlap", "synset_overlap"),
    ("parent_overlap", "parent_overlap"),
)

_OVERLAP_ROWS = {"synset_overlap", "parent_overlap"}


def summary_table(
    stats_a: SubtreeStats, stats_b: SubtreeStats
) -> list[tuple[str, float | None, float | None, float | None]]:
    """Structure stats side by side with an elementwise a/b ratio column.

    Overlap rows are pairwise percentages, so their ratio stays blank; a
    zero denominator also leaves the ratio blank.
    """
    rows = []
    for label, attr in SUMMARY_ROWS:
        value_a = getattr(stats_a, attr)
        value_b = getattr(stats_b, attr)
        if label in _OVERLAP_ROWS or value_a is None or value_b is None or value_b == 0:
            ratio = None
        else:
            ratio = value_a / value_b
        rows.append((label, value_a, value_b, ratio))
    return rows
