from __future__ import annotations

import pytest

from contrastbench.lexicon import Synset, SynsetGraph
from contrastbench.matcher import LemmaIndex


def make_synset(synset_id, lemmas, parents=(), gloss="a thing"):
    return Synset(
        synset_id=synset_id,
        lemmas=tuple(lemmas),
        gloss=gloss,
        hypernym_ids=tuple(parents),
    )


TOY_SYNSETS = [
    make_synset("n.r", ["rootword"], gloss="the top concept"),
    make_synset("n.a", ["animal"], ["n.r"], gloss="a living creature"),
    make_synset("n.v", ["vehicle"], ["n.r"], gloss="a conveyance"),
    make_synset("n.dog", ["dog"], ["n.a"], gloss="a domesticated carnivore"),
    make_synset("n.cat", ["cat"], ["n.a"], gloss="a small feline"),
    make_synset("n.husky", ["husky"], ["n.dog"], gloss="a working sled dog"),
    make_synset("n.pup", ["pup", "puppy"], ["n.dog"], gloss="a young dog"),
    make_synset(
        "n.car1",
        ["car", "automobile", "motor car"],
        ["n.v"],
        gloss="a motor vehicle with four wheels",
    ),
    make_synset(
        "n.car2",
        ["car", "railcar"],
        ["n.v"],
        gloss="a wheeled vehicle adapted to the rails of a railroad",
    ),
]


@pytest.fixture
def toy_graph() -> SynsetGraph:
    return SynsetGraph(TOY_SYNSETS)


@pytest.fixture
def toy_index(toy_graph) -> LemmaIndex:
    return LemmaIndex.from_graph(toy_graph)


@pytest.fixture(scope="session")
def desk_layout(tmp_path_factory):
    """Shared synthetic desk corpus; generation is deterministic."""
    from contrastbench.synthetic import write_desk_corpus

    return write_desk_corpus(tmp_path_factory.mktemp("desk"))


@pytest.fixture(scope="session")
def desk_inputs(desk_layout):
    from contrastbench.synthetic import load_desk_inputs

    return load_desk_inputs(desk_layout)


@pytest.fixture(scope="session")
def desk_manifest(desk_inputs):
    from contrastbench.pipeline import BlocklistNsfwClassifier, run_pipeline

    return run_pipeline(
        desk_inputs.records,
        desk_inputs.graph,
        desk_inputs.index,
        desk_inputs.reference,
        desk_inputs.stores,
        desk_inputs.config,
        nsfw_classifier=BlocklistNsfwClassifier(desk_inputs.blocklist),
    )
