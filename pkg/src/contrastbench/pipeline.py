"""The eight-stage curation pipeline producing a dataset manifest.

Stages, each independently invocable and audited via per-step drop counts:

    1. match captions to candidate noun synsets
    2. remove candidates overlapping the reference benchmark (id or lemma)
    3. drop candidates with too few caption matches
    4. keep only leaves of the minimal subtree over the surviving candidates
    5. drop candidates flagged by the NSFW classifier (blocklist by default)
    6. keep only captions matching exactly one surviving class
    7. drop candidates whose top-n mean caption-gloss similarity is below
       the threshold (keep if >= threshold)
    8. rank candidates by mean of their top image-class similarities and
       keep the best num_classes

Everything is canonically sorted, so a rerun over the same inputs and config
emits a bytewise-identical manifest.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Callable, Iterable, Mapping

from . import matcher
from .corpus import CaptionRecord, normalize_caption
from .embeddings import EmbeddingStore, similarity, stable_text_key, top_n_mean
from .errors import AuditViolation, InputError, ValidationError
from .lexicon import ReferenceClass, SynsetGraph
from .textnorm import tokenize

logger = logging.getLogger(__name__)

MANIFEST_FORMAT = "contrastbench-manifest-v1"
MANIFEST_COLUMNS = (
    "class_rank",
    "synset_id",
    "class_name",
    "split",
    "record_id",
    "image_uri",
    "gloss_sim",
    "image_class_sim",
)

IMAGE_CLASS_SIM_NOTE = "image_class_similarity=image_embedding x class_name_text_embedding"


class MissingSimilarities(ValidationError):
    pass


class InsufficientPairs(ValidationError):
    pass


class DuplicateRecord(ValidationError):
    pass


class ClassifierUnavailable(ValidationError):
    pass


class ManifestFormatError(InputError):
    pass


class ManifestViolation(AuditViolation):
    pass


@dataclass(frozen=True)
class PipelineConfig:
    """Tunable knobs of the curation pipeline with desk-safe validation."""

    min_class_size: int = 1100
    gloss_sim_threshold: float = 0.82
    top_n_gloss: int = 1000
    pairs_per_class: int = 1100
    num_classes: int = 1000
    train_per_class: int = 1000
    test_per_class: int = 100
    nsfw_enabled: bool = True

    def __post_init__(self):
        for name in (
            "min_class_size",
            "top_n_gloss",
            "pairs_per_class",
            "num_classes",
            "train_per_class",
            "test_per_class",
        ):
            if getattr(self, name) < 1:
                raise ValidationError(f"{name} must be positive")
        if not 0.0 < self.gloss_sim_threshold < 1.0:
            raise ValidationError("gloss_sim_threshold must be strictly between 0 and 1")
        if self.train_per_class + self.test_per_class > self.pairs_per_class:
            raise ValidationError("train_per_class + test_per_class must be <= pairs_per_class")
        if self.pairs_per_class > self.min_class_size:
            raise ValidationError("pairs_per_class must be <= min_class_size")

    def snapshot_lines(self) -> list[str]:
        return [f"{f.name}={getattr(self, f.name)!r}" for f in fields(self)]

    @classmethod
    def from_mapping(cls, mapping: Mapping[str, str]) -> "PipelineConfig":
        known = {f.name: f.type for f in fields(cls)}
        kwargs = {}
        for key, raw in mapping.items():
            if key not in known:
                raise ValidationError(f"unknown config key: {key}")
            if key == "nsfw_enabled":
                if raw not in ("True", "False", "true", "false", "1", "0"):
                    raise ValidationError(f"bad boolean for {key}: {raw!r}")
                kwargs[key] = raw in ("True", "true", "1")
            elif key == "gloss_sim_threshold":
                kwargs[key] = float(raw)
            else:
                kwargs[key] = int(raw)
        return cls(**kwargs)


@dataclass(frozen=True)
class ClassCandidate:
    """One candidate class flowing through the funnel."""

    synset_id: str
    caption_ids: tuple[int, ...] = ()
    gloss_sims: tuple[float, ...] = ()
    image_class_sims: tuple[float, ...] = ()
    status: str = "active"  # active | dropped
    dropped_step: int | None = None
    dropped_reason: str | None = None
    score: float | None = None

    @property
    def active(self) -> bool:
        return self.status == "active"

    def dropped(self, step: int, reason: str) -> "ClassCandidate":
        return replace(self, status="dropped", dropped_step=step, dropped_reason=reason)


def active_candidates(candidates: Iterable[ClassCandidate]) -> list[ClassCandidate]:
    return [c for c in candidates if c.active]


@dataclass(frozen=True)
class ManifestPair:
    record_id: int
    image_uri: str
    split: str  # train | test
    gloss_sim: float
    image_class_sim: float


@dataclass(frozen=True)
class ManifestClass:
    rank: int
    synset_id: str
    class_name: str
    mean_gloss_sim: float
    mean_image_class_sim: float
    pairs: tuple[ManifestPair, ...]

    def train_ids(self) -> tuple[int, ...]:
        return tuple(p.record_id for p in self.pairs if p.split == "train")

    def test_ids(self) -> tuple[int, ...]:
        return tuple(p.record_id for p in self.pairs if p.split == "test")


@dataclass
class Provenance:
    """Audit trail: per-step funnel counts, stage-8 scores, warnings."""

    active_after: dict[int, int] = field(default_factory=dict)
    drop_counts: dict[int, int] = field(default_factory=dict)
    drops: list[tuple[int, str, str]] = field(default_factory=list)
    step8_scores: dict[str, tuple[float, bool]] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)
    dataset_mean_gloss_sim: float | None = None
    providers: dict[str, str] = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)


@dataclass
class DatasetManifest:
    classes: list[ManifestClass]
    config: PipelineConfig
    provenance: Provenance

    def class_ids(self) -> tuple[str, ...]:
        return tuple(c.synset_id for c in self.classes)


@dataclass(frozen=True)
class PipelineStores:
    """The four embedding sidecars the pipeline consumes.

    captions and images are keyed by record_id; glosses and class_names by
    stable_text_key(synset_id).
    """

    captions: EmbeddingStore
    glosses: EmbeddingStore
    class_names: EmbeddingStore
    images: EmbeddingStore


class BlocklistNsfwClassifier:
    """Default NSFW contract: flag a synset when any lemma token or gloss
    token appears in the blocklist."""

    def __init__(self, blocked: Iterable[str] = ()):
        self.blocked = frozenset(blocked)

    def __call__(self, synset) -> bool:
        if not self.blocked:
            return False
        for lemma in synset.lemmas:
            if self.blocked & set(tokenize(lemma)):
                return True
        return bool(self.blocked & set(tokenize(synset.gloss)))


# -- individual stages ------------------------------------------------------


def filter_by_size(candidates: list[ClassCandidate], min_class_size: int) -> list[ClassCandidate]:
    out = []
    for candidate in candidates:
        if candidate.active and len(candidate.caption_ids) < min_class_size:
            out.append(
                candidate.dropped(
                    3, f"{len(candidate.caption_ids)} captions < min_class_size {min_class_size}"
                )
            )
        else:
            out.append(candidate)
    return out


def subtree_leaf_selection(
    candidates: list[ClassCandidate], graph: SynsetGraph
) -> list[ClassCandidate]:
    """Keep only candidates that are leaves of the minimal subtree spanned
    by all active candidates."""
    active_ids = [c.synset_id for c in candidates if c.active]
    if not active_ids:
        return list(candidates)
    leaves = graph.minimal_subtree(active_ids).leaves()
    out = []
    for candidate in candidates:
        if candidate.active and candidate.synset_id not in leaves:
            out.append(candidate.dropped(4, "not a leaf of the candidate subtree"))
        else:
            out.append(candidate)
    return out


def nsfw_filter(
    candidates: list[ClassCandidate],
    graph: SynsetGraph,
    classifier: Callable[[object], bool],
) -> list[ClassCandidate]:
    out = []
    for candidate in candidates:
        if not candidate.active:
            out.append(candidate)
            continue
        try:
            flagged = bool(classifier(graph.synset(candidate.synset_id)))
        except Exception as exc:  # classifier is an external contract
            raise ClassifierUnavailable(f"NSFW classifier failed: {exc}") from exc
        out.append(candidate.dropped(5, "flagged by NSFW classifier") if flagged else candidate)
    return out


def attach_gloss_similarities(
    candidates: list[ClassCandidate],
    captions: EmbeddingStore,
    glosses: EmbeddingStore,
) -> list[ClassCandidate]:
    """Populate caption x gloss similarities for every active candidate."""
    out = []
    for candidate in candidates:
        if not candidate.active:
            out.append(candidate)
            continue
        gloss_key = stable_text_key(candidate.synset_id)
        if gloss_key not in glosses:
            raise MissingSimilarities(f"no gloss embedding for synset {candidate.synset_id}")
        gloss_vector = glosses.vector(gloss_key)
        sims = tuple(
            similarity(captions.vector(record_id), gloss_vector)
            for record_id in candidate.caption_ids
        )
        out.append(replace(candidate, gloss_sims=sims))
    return out


def gloss_similarity_filter(
    candidates: list[ClassCandidate], config: PipelineConfig
) -> list[ClassCandidate]:
    """Drop candidates below the gloss-similarity bar; keep if >= threshold."""
    out = []
    for candidate in candidates:
        if not candidate.active:
            out.append(candidate)
            continue
        if not candidate.gloss_sims:
            raise MissingSimilarities(f"candidate {candidate.synset_id} has no gloss sims")
        mean = top_n_mean(candidate.gloss_sims, config.top_n_gloss)
        if mean < config.gloss_sim_threshold:
            out.append(
                candidate.dropped(
                    7,
                    f"top-{config.top_n_gloss} mean gloss similarity {mean!r}"
                    f" < {config.gloss_sim_threshold}",
                )
            )
        else:
            out.append(candidate)
    return out


def attach_image_class_similarities(
    candidates: list[ClassCandidate],
    images: EmbeddingStore,
    class_names: EmbeddingStore,
) -> list[ClassCandidate]:
    out = []
    for candidate in candidates:
        if not candidate.active:
            out.append(candidate)
            continue
        name_key = stable_text_key(candidate.synset_id)
        if name_key not in class_names:
            raise MissingSimilarities(f"no class-name embedding for synset {candidate.synset_id}")
        name_vector = class_names.vector(name_key)
        sims = tuple(
            similarity(images.vector(record_id), name_vector)
            for record_id in candidate.caption_ids
        )
        out.append(replace(candidate, image_class_sims=sims))
    return out


def rank_and_select(
    candidates: list[ClassCandidate], config: PipelineConfig
) -> tuple[list[ClassCandidate], list[ClassCandidate], list[str]]:
    """Score candidates by mean of their top image-class sims and keep the
    best num_classes (ties by ascending synset_id).

    Returns (selected in rank order, dropped at this step, warnings)."""
    scored = []
    for candidate in active_candidates(candidates):
        if len(candidate.image_class_sims) < config.pairs_per_class:
            raise InsufficientPairs(
                f"candidate {candidate.synset_id} has {len(candidate.image_class_sims)}"
                f" scored pairs, needs {config.pairs_per_class}"
            )
        score = top_n_mean(candidate.image_class_sims, config.pairs_per_class)
        scored.append(replace(candidate, score=score))
    scored.sort(key=lambda c: (-c.score, c.synset_id))
    warnings = []
    if len(scored) < config.num_classes:
        warnings.append(
            f"InsufficientCandidates: {len(scored)} active candidates"
            f" < num_classes {config.num_classes}; emitting a reduced manifest"
        )
    selected = scored[: config.num_classes]
    dropped = [c.dropped(8, "below selection cutoff") for c in scored[config.num_classes :]]
    return selected, dropped, warnings


def assemble_manifest(
    selected: list[ClassCandidate],
    config: PipelineConfig,
    records_by_id: Mapping[int, CaptionRecord],
    graph: SynsetGraph,
) -> list[ManifestClass]:
    """Build the per-class train/test split from the top-scoring pairs."""
    classes = []
    for rank, candidate in enumerate(selected, 1):
        if len(set(candidate.caption_ids)) != len(candidate.caption_ids):
            raise DuplicateRecord(f"duplicate record id within class {candidate.synset_id}")
        pairs = sorted(
            zip(candidate.caption_ids, candidate.image_class_sims, candidate.gloss_sims),
            key=lambda p: (-p[1], p[0]),
        )
        needed = config.train_per_class + config.test_per_class
        if len(pairs) < needed:
            raise InsufficientPairs(
                f"class {candidate.synset_id} has {len(pairs)} pairs, needs {needed}"
            )
        pairs = pairs[: config.pairs_per_class]
        manifest_pairs = tuple(
            ManifestPair(
                record_id=record_id,
                image_uri=records_by_id[record_id].image_uri,
                split="train" if position < config.train_per_class else "test",
                gloss_sim=gloss_sim,
                image_class_sim=image_sim,
            )
            for position, (record_id, image_sim, gloss_sim) in enumerate(pairs[:needed])
        )
        classes.append(
            ManifestClass(
                rank=rank,
                synset_id=candidate.synset_id,
                class_name=graph.synset(candidate.synset_id).lemmas[0],
                mean_gloss_sim=top_n_mean(candidate.gloss_sims, config.top_n_gloss),
                mean_image_class_sim=candidate.score,
                pairs=manifest_pairs,
            )
        )
    return classes


# -- the whole funnel --------------------------------------------------------


def run_pipeline(
    records: Iterable[CaptionRecord],
    graph: SynsetGraph,
    lemma_index: matcher.LemmaIndex,
    reference: Iterable[ReferenceClass],
    stores: PipelineStores,
    config: PipelineConfig,
    nsfw_classifier: Callable[[object], bool] | None = None,
) -> DatasetManifest:
    """Execute stages 1-8 and return the manifest with full provenance."""
    provenance = Provenance()
    provenance.providers = {
        "captions": stores.captions.source_tag,
        "glosses": stores.glosses.source_tag,
        "class_names": stores.class_names.source_tag,
        "images": stores.images.source_tag,
    }
    provenance.notes.append(IMAGE_CLASS_SIM_NOTE)
    reference = list(reference)

    # Stage 1: caption-to-synset matching.
    records_by_id: dict[int, CaptionRecord] = {}
    matched_ids: dict[str, list[int]] = {}
    for record in records:
        if record.record_id in records_by_id:
            raise DuplicateRecord(f"duplicate record id {record.record_id} at intake")
        records_by_id[record.record_id] = record
        caption = normalize_caption(record.caption)
        for synset_id in matcher.extract_synsets(caption, lemma_index).synset_ids():
            matched_ids.setdefault(synset_id, []).append(record.record_id)
    candidates = [
        ClassCandidate(synset_id=synset_id, caption_ids=tuple(sorted(ids)))
        for synset_id, ids in sorted(matched_ids.items())
    ]
    provenance.active_after[1] = len(candidates)
    provenance.drop_counts[1] = 0

    def _note_step(step: int, updated: list[ClassCandidate]) -> list[ClassCandidate]:
        dropped_here = [
            c for c in updated if c.status == "dropped" and c.dropped_step == step
        ]
        provenance.drop_counts[step] = len(dropped_here)
        provenance.drops.extend((step, c.synset_id, c.dropped_reason) for c in dropped_here)
        provenance.active_after[step] = sum(1 for c in updated if c.active)
        return updated

    # Stage 2: reference overlap removal.
    survivors = matcher.remove_reference_overlap(
        [c.synset_id for c in candidates], reference, graph
    )
    candidates = _note_step(
        2,
        [
            c if c.synset_id in survivors else c.dropped(2, "overlaps the reference benchmark")
            for c in candidates
        ],
    )

    # Stage 3: size floor.
    candidates = _note_step(3, filter_by_size(candidates, config.min_class_size))
    if not any(c.active for c in candidates):
        provenance.warnings.append("all candidates dropped by the size filter")

    # Stage 4: minimal-subtree leaves.
    candidates = _note_step(4, subtree_leaf_selection(candidates, graph))

    # Stage 5: NSFW contract.
    if config.nsfw_enabled:
        classifier = nsfw_classifier or BlocklistNsfwClassifier()
        candidates = _note_step(5, nsfw_filter(candidates, graph, classifier))
    else:
        provenance.active_after[5] = sum(1 for c in candidates if c.active)
        provenance.drop_counts[5] = 0

    # Stage 6: caption exclusivity over the surviving classes.
    class_lemmas = {
        c.synset_id: graph.synset(c.synset_id).lemmas for c in candidates if c.active
    }
    kept_records = matcher.exclusive_caption_filter(
        [records_by_id[rid] for c in active_candidates(candidates) for rid in c.caption_ids],
        class_lemmas,
    )
    updated = []
    for candidate in candidates:
        if not candidate.active:
            updated.append(candidate)
            continue
        ids = tuple(sorted({r.record_id for r in kept_records[candidate.synset_id]}))
        candidate = replace(candidate, caption_ids=ids)
        if len(ids) < config.pairs_per_class:
            candidate = candidate.dropped(
                6,
                f"{len(ids)} exclusive captions < pairs_per_class {config.pairs_per_class}",
            )
        updated.append(candidate)
    candidates = _note_step(6, updated)

    # Stage 7: gloss-similarity bar.
    candidates = attach_gloss_similarities(candidates, stores.captions, stores.glosses)
    candidates = _note_step(7, gloss_similarity_filter(candidates, config))

    # Stage 8: rank and select.
    candidates = attach_image_class_similarities(candidates, stores.images, stores.class_names)
    selected, dropped8, warnings = rank_and_select(candidates, config)
    provenance.warnings.extend(warnings)
    provenance.drop_counts[8] = len(dropped8)
    provenance.drops.extend((8, c.synset_id, c.dropped_reason) for c in dropped8)
    provenance.active_after[8] = len(selected)
    for candidate in selected:
        provenance.step8_scores[candidate.synset_id] = (candidate.score, True)
    for candidate in dropped8:
        provenance.step8_scores[candidate.synset_id] = (candidate.score, False)

    classes = assemble_manifest(selected, config, records_by_id, graph)
    all_gloss_sims = [pair.gloss_sim for cls in classes for pair in cls.pairs]
    if all_gloss_sims:
        provenance.dataset_mean_gloss_sim = sum(all_gloss_sims) / len(all_gloss_sims)
    manifest = DatasetManifest(classes=classes, config=config, provenance=provenance)
    logger.info(
        "pipeline: %d classes selected, drops per step %s",
        len(classes),
        provenance.drop_counts,
    )
    return manifest


# -- manifest I/O -------------------------------------------------------------


def write_manifest(manifest: DatasetManifest, path: Path | str) -> None:
    """Emit the manifest: a comment header block, then one TSV row per pair.

    Contains no timestamps; reruns over identical inputs are bytewise equal.
    """
    lines = [f"# {MANIFEST_FORMAT}"]
    for entry in manifest.config.snapshot_lines():
        lines.append(f"# config: {entry}")
    for name in sorted(manifest.provenance.providers):
        lines.append(f"# provider: {name}={manifest.provenance.providers[name]}")
    for note in manifest.provenance.notes:
        lines.append(f"# note: {note}")
    for step in sorted(manifest.provenance.active_after):
        lines.append(
            f"# funnel: step={step}"
            f" active={manifest.provenance.active_after[step]}"
            f" dropped={manifest.provenance.drop_counts.get(step, 0)}"
        )
    for step, synset_id, reason in manifest.provenance.drops:
        lines.append(f"# drop: step={step} synset={synset_id} reason={reason}")
    for synset_id in sorted(manifest.provenance.step8_scores):
        score, selected = manifest.provenance.step8_scores[synset_id]
        status = "selected" if selected else "dropped"
        lines.append(f"# step8: synset={synset_id} score={score!r} status={status}")
    for cls in manifest.classes:
        # name goes last: multiword class names contain spaces
        lines.append(
            f"# class: rank={cls.rank} synset={cls.synset_id}"
            f" mean_gloss_sim={cls.mean_gloss_sim!r}"
            f" mean_image_class_sim={cls.mean_image_class_sim!r}"
            f" name={cls.class_name}"
        )
    for warning in manifest.provenance.warnings:
        lines.append(f"# warning: {warning}")
    if manifest.provenance.dataset_mean_gloss_sim is not None:
        lines.append(
            f"# dataset_mean_gloss_sim: {manifest.provenance.dataset_mean_gloss_sim!r}"
        )
    lines.append("# columns: " + "\t".join(MANIFEST_COLUMNS))
    for cls in manifest.classes:
        for pair in cls.pairs:
            lines.append(
                "\t".join(
                    (
                        str(cls.rank),
                        cls.synset_id,
                        cls.class_name,
                        pair.split,
                        str(pair.record_id),
                        pair.image_uri,
                        repr(pair.gloss_sim),
                        repr(pair.image_class_sim),
                    )
                )
            )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_manifest(path: Path | str) -> DatasetManifest:
    path = Path(path)
    if not path.is_file():
        raise InputError(f"manifest not found: {path}")
    config_map: dict[str, str] = {}
    provenance = Provenance()
    class_meta: dict[str, tuple[float, float]] = {}
    rows: list[tuple] = []
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines or lines[0] != f"# {MANIFEST_FORMAT}":
        raise ManifestFormatError(f"{path.name}: missing `# {MANIFEST_FORMAT}` header")
    for line in lines[1:]:
        if line.startswith("# config: "):
            key, value = line[len("# config: ") :].split("=", 1)
            config_map[key] = value.strip("'\"")
        elif line.startswith("# provider: "):
            name, tag = line[len("# provider: ") :].split("=", 1)
            provenance.providers[name] = tag
        elif line.startswith("# note: "):
            provenance.notes.append(line[len("# note: ") :])
        elif line.startswith("# funnel: "):
            parts = dict(item.split("=") for item in line[len("# funnel: ") :].split())
            step = int(parts["step"])
            provenance.active_after[step] = int(parts["active"])
            provenance.drop_counts[step] = int(parts["dropped"])
        elif line.startswith("# drop: "):
            body = line[len("# drop: ") :]
            step_part, synset_part, reason_part = body.split(" ", 2)
            provenance.drops.append(
                (
                    int(step_part.split("=", 1)[1]),
                    synset_part.split("=", 1)[1],
                    reason_part.split("=", 1)[1],
                )
            )
        elif line.startswith("# step8: "):
            parts = dict(item.split("=", 1) for item in line[len("# step8: ") :].split(" "))
            provenance.step8_scores[parts["synset"]] = (
                float(parts["score"]),
                parts["status"] == "selected",
            )
        elif line.startswith("# class: "):
            head = line[len("# class: ") :].split(" ", 4)
            parts = dict(item.split("=", 1) for item in head[:4])
            parts["name"] = head[4].split("=", 1)[1]
            class_meta[parts["synset"]] = (
                float(parts["mean_gloss_sim"]),
                float(parts["mean_image_class_sim"]),
            )
        elif line.startswith("# warning: "):
            provenance.warnings.append(line[len("# warning: ") :])
        elif line.startswith("# dataset_mean_gloss_sim: "):
            provenance.dataset_mean_gloss_sim = float(line.split(": ", 1)[1])
        elif line.startswith("#"):
            continue
        elif line.strip():
            fields_ = line.split("\t")
            if len(fields_) != len(MANIFEST_COLUMNS):
                raise ManifestFormatError(f"{path.name}: bad row {line!r}")
            rows.append(fields_)
    config = PipelineConfig.from_mapping(config_map)
    by_class: dict[tuple[int, str, str], list[ManifestPair]] = {}
    for rank, synset_id, class_name, split, record_id, image_uri, gloss_sim, image_sim in rows:
        by_class.setdefault((int(rank), synset_id, class_name), []).append(
            ManifestPair(
                record_id=int(record_id),
                image_uri=image_uri,
                split=split,
                gloss_sim=float(gloss_sim),
                image_class_sim=float(image_sim),
            )
        )
    classes = []
    for (rank, synset_id, class_name), pairs in sorted(by_class.items()):
        mean_gloss, mean_image = class_meta.get(synset_id, (float("nan"), float("nan")))
        classes.append(
            ManifestClass(
                rank=rank,
                synset_id=synset_id,
                class_name=class_name,
                mean_gloss_sim=mean_gloss,
                mean_image_class_sim=mean_image,
                pairs=tuple(pairs),
            )
        )
    return DatasetManifest(classes=classes, config=config, provenance=provenance)


# -- invariants ---------------------------------------------------------------


def verify_manifest(
    manifest: DatasetManifest,
    graph: SynsetGraph | None = None,
    reference: Iterable[ReferenceClass] | None = None,
    records_by_id: Mapping[int, CaptionRecord] | None = None,
) -> list[str]:
    """Recheck every manifest invariant; returns a list of violations.

    Graph, reference, and record context unlock the deeper checks (lemma
    disjointness and caption exclusivity).
    """
    violations: list[str] = []
    config = manifest.config

    ids = [c.synset_id for c in manifest.classes]
    if len(set(ids)) != len(ids):
        violations.append("class synsets are not pairwise distinct")

    seen_records: set[int] = set()
    for cls in manifest.classes:
        train = cls.train_ids()
        test = cls.test_ids()
        if len(train) != config.train_per_class:
            violations.append(
                f"class {cls.synset_id}: {len(train)} train pairs,"
                f" expected {config.train_per_class}"
            )
        if len(test) != config.test_per_class:
            violations.append(
                f"class {cls.synset_id}: {len(test)} test pairs,"
                f" expected {config.test_per_class}"
            )
        if set(train) & set(test):
            violations.append(f"class {cls.synset_id}: train/test overlap")
        for record_id in (*train, *test):
            if record_id in seen_records:
                violations.append(f"record {record_id} appears in more than one class")
            seen_records.add(record_id)
        for pair in cls.pairs:
            if not -1.0 <= pair.gloss_sim <= 1.0 or not -1.0 <= pair.image_class_sim <= 1.0:
                violations.append(f"class {cls.synset_id}: similarity out of [-1, 1]")
                break
        if not math.isnan(cls.mean_gloss_sim) and cls.mean_gloss_sim < config.gloss_sim_threshold:
            violations.append(
                f"class {cls.synset_id}: mean gloss similarity {cls.mean_gloss_sim!r}"
                f" below threshold {config.gloss_sim_threshold}"
            )

    scores = manifest.provenance.step8_scores
    if scores:
        selected_scores = [s for s, selected in scores.values() if selected]
        dropped_scores = [s for s, selected in scores.values() if not selected]
        if selected_scores and dropped_scores:
            if max(dropped_scores) > min(selected_scores):
                violations.append(
                    "selection not optimal: a dropped candidate outscores a selected class"
                )

    if graph is not None and reference is not None:
        reference_lemmas: set[str] = set()
        for ref in reference:
            reference_lemmas.update(ref.lemmas)
        reference_ids = {ref.synset_id for ref in reference}
        for cls in manifest.classes:
            if cls.synset_id in reference_ids:
                violations.append(f"class {cls.synset_id} is a reference synset")
            if set(graph.synset(cls.synset_id).lemmas) & reference_lemmas:
                violations.append(f"class {cls.synset_id} shares a lemma with the reference")

    if graph is not None and records_by_id is not None:
        class_lemmas = {
            cls.synset_id: graph.synset(cls.synset_id).lemmas for cls in manifest.classes
        }
        index = matcher.LemmaIndex.from_class_lemmas(class_lemmas)
        for cls in manifest.classes:
            for pair in cls.pairs:
                caption = normalize_caption(records_by_id[pair.record_id].caption)
                matched = matcher.extract_synsets(caption, index).synset_ids()
                if matched != {cls.synset_id}:
                    violations.append(
                        f"caption {pair.record_id} of class {cls.synset_id}"
                        f" matches classes {sorted(matched)}"
                    )

    return violations
