"""Deterministic desk-scale corpus for exercising the whole pipeline.

Generates a small world on disk: a lexicon with hub structure, a caption
corpus whose classes hit every drop stage (reference overlap, size floor,
non-leaf ancestor, blocklist, exclusivity shrink, low gloss similarity),
mock-embedding sidecars, and a config file for the CLI. Everything is a pure
function of the seed.
"""
from __future__ import annotations

import random
from dataclasses import dataclass
from pathlib import Path

from .corpus import CaptionRecord, open_corpus
from .embeddings import (
    EmbeddingStore,
    MockProvider,
    read_sidecar,
    stable_text_key,
    store_from_texts,
    write_sidecar,
)
from .lexicon import ReferenceClass, SynsetGraph, load_lexicon, load_reference
from .matcher import LemmaIndex
from .pipeline import PipelineConfig, PipelineStores

_SYLLABLES = (
    "ba", "ce", "di", "fo", "gu", "ha", "ki", "lo", "mu",
    "ne", "po", "ru", "sa", "te", "vi", "wo", "ya", "zu",
)

BLOCKLIST_GLOSS_TOKEN = "tabooq"


def _lemma(i: int) -> str:
    return (
        _SYLLABLES[i % 18]
        + _SYLLABLES[(i // 18 + 7 * i + 3) % 18]
        + _SYLLABLES[(i // 324 + 3 * i + 5) % 18]
    )


@dataclass(frozen=True)
class DeskLayout:
    root: Path
    corpus: Path
    lexicon: Path
    reference: Path
    captions_sidecar: Path
    glosses_sidecar: Path
    class_names_sidecar: Path
    images_sidecar: Path
    config: Path
    blocklist: Path


@dataclass(frozen=True)
class DeskInputs:
    records: list[CaptionRecord]
    graph: SynsetGraph
    index: LemmaIndex
    reference: list[ReferenceClass]
    stores: PipelineStores
    config: PipelineConfig
    blocklist: frozenset[str]


def desk_config() -> PipelineConfig:
    return PipelineConfig(
        min_class_size=30,
        gloss_sim_threshold=0.5,
        top_n_gloss=30,
        pairs_per_class=30,
        num_classes=20,
        train_per_class=25,
        test_per_class=5,
        nsfw_enabled=True,
    )


def write_desk_corpus(
    root: Path | str,
    seed: int = 11,
    dim: int = 128,
    classes: int = 50,
    captions_per_class: int = 200,
) -> DeskLayout:
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    rng = random.Random(f"desk:{seed}")

    lemmas = [_lemma(i) for i in range(classes)]
    assert len(set(lemmas)) == classes, "syllable table produced a lemma collision"
    # Two classes get multiword lemmas to exercise longest-phrase matching.
    lemmas[20] = lemmas[20] + " " + _lemma(classes + 1)
    lemmas[21] = lemmas[21] + " " + _lemma(classes + 2)

    sid = [f"c{i:02d}.n.01" for i in range(classes)]
    gloss_tokens = {i: [f"gls{i}k{k}" for k in range(3)] for i in range(classes)}

    # Lexicon: one root, five hubs, candidates under hubs. c02 hangs under
    # c01 so that c01 is a non-leaf ancestor once both are candidates.
    lexicon_lines = ["n.root\t\trootword\tthe shared top concept"]
    for h in range(5):
        lexicon_lines.append(f"n.hub{h}\tn.root\thubword{h}\tgroup concept {h}")
    for i in range(classes):
        parent = "c01.n.01" if i == 2 else f"n.hub{i % 5}"
        g = gloss_tokens[i]
        gloss = f"{lemmas[i]} {g[0]} {g[1]} {g[2]}"
        if i == 7:
            gloss = f"{gloss} {BLOCKLIST_GLOSS_TOKEN}"
        # c30 gets a second hypernym to keep multi-parent edges visible.
        parents = parent if i != 30 else f"{parent},n.hub1"
        lexicon_lines.append(f"{sid[i]}\t{parents}\t{lemmas[i]},alt {lemmas[i]}\t{gloss}")
    lexicon_path = root / "lexicon.tsv"
    lexicon_path.write_text("\n".join(lexicon_lines) + "\n", encoding="utf-8")

    # Reference benchmark: id collision with c05, lemma collisions with c03
    # and c04, plus two unrelated entries.
    reference_lines = [
        f"{sid[5]}\trefword0,refword1",
        f"r.a.01\t{lemmas[3]},refextra0",
        f"r.b.01\trefextra1,{lemmas[4]}",
        "r.c.01\trefonly0",
        "r.d.01\trefonly1",
    ]
    reference_path = root / "reference.tsv"
    reference_path.write_text("\n".join(reference_lines) + "\n", encoding="utf-8")

    blocklist_path = root / "blocklist.txt"
    blocklist_path.write_text(f"{lemmas[6]}\n{BLOCKLIST_GLOSS_TOKEN}\n", encoding="utf-8")

    corpus_lines = []
    image_texts: dict[int, str] = {}
    record_id = 1000

    def add_caption(i: int, caption: str, j: int) -> None:
        nonlocal record_id
        uri = f"img://c{i:02d}/{j}"
        shard = f"shard{i % 2}"
        corpus_lines.append(f"{record_id}\t{caption}\t{uri}\t{shard}")
        repeat = 1 + (i % 3)
        image_texts[record_id] = " ".join(
            [lemmas[i]] * repeat + [gloss_tokens[i][0], f"flr{j % 7}"]
        )
        record_id += 1

    low_sim_classes = {11, 12, 13, 14}
    for i in range(classes):
        g = gloss_tokens[i]
        if i == 8:
            count = 20  # below the size floor
        elif i == 9:
            count = 25  # plus 5 cross captions below
        else:
            count = captions_per_class
        for j in range(count):
            filler = f"flr{rng.randrange(40)}"
            if i in low_sim_classes:
                caption = f"{lemmas[i]} {filler} flx{j % 9} flz{j % 5}"
            else:
                caption = f"{lemmas[i]} {g[0]} {g[1]} {filler}"
            if j % 17 == 0 and " " not in lemmas[i]:
                caption = caption.replace(lemmas[i], lemmas[i] + "s", 1)  # plural form
            add_caption(i, caption, j)
    for j in range(5):  # captions naming both c09 and c10: excluded at stage 6
        add_caption(9, f"{lemmas[9]} {lemmas[10]} {gloss_tokens[9][0]} flr{j}", 900 + j)

    corpus_path = root / "corpus.tsv"
    corpus_path.write_text("\n".join(corpus_lines) + "\n", encoding="utf-8")

    provider = MockProvider(seed=seed, dim=dim)
    graph, _ = load_lexicon(lexicon_path)
    captions_store = store_from_texts(
        provider,
        (
            (int(line.split("\t")[0]), line.split("\t")[1])
            for line in corpus_lines
        ),
    )
    images_store = EmbeddingStore(
        dim=dim,
        entries={rid: provider.encode(text) for rid, text in image_texts.items()},
        source_tag=provider.source_tag + ",role=image-stand-in",
    )
    glosses_store = store_from_texts(
        provider,
        (
            (stable_text_key(s), graph.synset(s).gloss)
            for s in graph.synset_ids()
        ),
    )
    names_store = store_from_texts(
        provider,
        (
            (stable_text_key(s), graph.synset(s).lemmas[0])
            for s in graph.synset_ids()
        ),
    )

    paths = DeskLayout(
        root=root,
        corpus=corpus_path,
        lexicon=lexicon_path,
        reference=reference_path,
        captions_sidecar=root / "captions.emb",
        glosses_sidecar=root / "glosses.emb",
        class_names_sidecar=root / "class_names.emb",
        images_sidecar=root / "images.emb",
        config=root / "desk.cfg",
        blocklist=blocklist_path,
    )
    write_sidecar(captions_store, paths.captions_sidecar)
    write_sidecar(glosses_store, paths.glosses_sidecar)
    write_sidecar(names_store, paths.class_names_sidecar)
    write_sidecar(images_store, paths.images_sidecar)

    config = desk_config()
    config_lines = ["# desk-scale pipeline configuration"]
    config_lines += config.snapshot_lines()
    config_lines += [
        f"corpus={paths.corpus}",
        f"lexicon={paths.lexicon}",
        f"reference={paths.reference}",
        f"sidecar_captions={paths.captions_sidecar}",
        f"sidecar_glosses={paths.glosses_sidecar}",
        f"sidecar_class_names={paths.class_names_sidecar}",
        f"sidecar_images={paths.images_sidecar}",
        f"blocklist={paths.blocklist}",
    ]
    paths.config.write_text("\n".join(config_lines) + "\n", encoding="utf-8")
    return paths


def load_desk_inputs(layout: DeskLayout) -> DeskInputs:
    """Load every generated artifact back through the real readers."""
    records = list(open_corpus(layout.corpus))
    graph, index = load_lexicon(layout.lexicon)
    reference = load_reference(layout.reference)
    stores = PipelineStores(
        captions=read_sidecar(layout.captions_sidecar),
        glosses=read_sidecar(layout.glosses_sidecar),
        class_names=read_sidecar(layout.class_names_sidecar),
        images=read_sidecar(layout.images_sidecar),
    )
    blocklist = frozenset(
        token
        for token in layout.blocklist.read_text(encoding="utf-8").split()
        if token
    )
    return DeskInputs(
        records=records,
        graph=graph,
        index=index,
        reference=reference,
        stores=stores,
        config=desk_config(),
        blocklist=blocklist,
    )
