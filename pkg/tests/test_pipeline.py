from __future__ import annotations

import pytest

from contrastbench.corpus import CaptionRecord
from contrastbench.embeddings import EmbeddingStore, MockProvider, stable_text_key
from contrastbench.errors import ValidationError
from contrastbench.lexicon import ReferenceClass, SynsetGraph
from contrastbench.matcher import LemmaIndex
from contrastbench.pipeline import (
    BlocklistNsfwClassifier,
    ClassCandidate,
    ClassifierUnavailable,
    DuplicateRecord,
    InsufficientPairs,
    MissingSimilarities,
    PipelineConfig,
    PipelineStores,
    assemble_manifest,
    filter_by_size,
    gloss_similarity_filter,
    nsfw_filter,
    rank_and_select,
    read_manifest,
    run_pipeline,
    subtree_leaf_selection,
    verify_manifest,
    write_manifest,
)

from conftest import make_synset


def small_config(**overrides):
    base = dict(
        min_class_size=3,
        gloss_sim_threshold=0.5,
        top_n_gloss=3,
        pairs_per_class=3,
        num_classes=2,
        train_per_class=2,
        test_per_class=1,
        nsfw_enabled=True,
    )
    base.update(overrides)
    return PipelineConfig(**base)


# -- config invariants -----------------------------------------------------------


def test_config_defaults_are_valid():
    config = PipelineConfig()
    assert config.pairs_per_class == 1100
    assert config.train_per_class + config.test_per_class == config.pairs_per_class


def test_config_rejects_split_larger_than_pairs():
    with pytest.raises(ValidationError):
        small_config(train_per_class=3, test_per_class=1)


def test_config_rejects_pairs_above_min_size():
    with pytest.raises(ValidationError):
        small_config(pairs_per_class=4)


def test_config_rejects_bad_threshold():
    with pytest.raises(ValidationError):
        small_config(gloss_sim_threshold=0.0)
    with pytest.raises(ValidationError):
        small_config(gloss_sim_threshold=1.0)


def test_config_mapping_round_trip():
    config = small_config()
    lines = dict(item.split("=", 1) for item in config.snapshot_lines())
    assert PipelineConfig.from_mapping(lines) == config
    with pytest.raises(ValidationError):
        PipelineConfig.from_mapping({"mystery_knob": "1"})


# -- stage 3: size filter -----------------------------------------------------------


def candidate(synset_id, n_captions, start=0):
    return ClassCandidate(synset_id=synset_id, caption_ids=tuple(range(start, start + n_captions)))


def test_filter_by_size_boundary():
    candidates = [candidate("a", 1099), candidate("b", 1100)]
    out = filter_by_size(candidates, 1100)
    assert out[0].status == "dropped" and out[0].dropped_step == 3
    assert out[1].active


def test_filter_by_size_all_below():
    out = filter_by_size([candidate("a", 1), candidate("b", 2)], 1100)
    assert not any(c.active for c in out)


# -- stage 4: subtree leaves ---------------------------------------------------------


def test_leaf_selection_drops_ancestor(toy_graph):
    candidates = [candidate("n.dog", 5), candidate("n.husky", 5)]
    out = subtree_leaf_selection(candidates, toy_graph)
    by_id = {c.synset_id: c for c in out}
    assert by_id["n.dog"].status == "dropped" and by_id["n.dog"].dropped_step == 4
    assert by_id["n.husky"].active


def test_leaf_selection_keeps_siblings(toy_graph):
    out = subtree_leaf_selection([candidate("n.husky", 5), candidate("n.pup", 5)], toy_graph)
    assert all(c.active for c in out)


def test_leaf_selection_single_candidate(toy_graph):
    out = subtree_leaf_selection([candidate("n.cat", 5)], toy_graph)
    assert out[0].active


# -- stage 5: nsfw ----------------------------------------------------------------------


def test_blocklist_flags_lemma(toy_graph):
    classifier = BlocklistNsfwClassifier({"husky"})
    out = nsfw_filter([candidate("n.husky", 5), candidate("n.cat", 5)], toy_graph, classifier)
    by_id = {c.synset_id: c for c in out}
    assert by_id["n.husky"].dropped_step == 5
    assert by_id["n.cat"].active


def test_blocklist_flags_gloss_token(toy_graph):
    classifier = BlocklistNsfwClassifier({"sled"})  # husky gloss: "a working sled dog"
    out = nsfw_filter([candidate("n.husky", 5), candidate("n.cat", 5)], toy_graph, classifier)
    assert {c.synset_id for c in out if not c.active} == {"n.husky"}


def test_broken_classifier_surfaces(toy_graph):
    def broken(_synset):
        raise RuntimeError("service down")

    with pytest.raises(ClassifierUnavailable):
        nsfw_filter([candidate("n.cat", 5)], toy_graph, broken)


# -- stage 7: gloss similarity bar -------------------------------------------------------


def sims_candidate(synset_id, sims):
    return ClassCandidate(
        synset_id=synset_id,
        caption_ids=tuple(range(len(sims))),
        gloss_sims=tuple(sims),
    )


def test_gloss_filter_boundary_drop_below():
    config = small_config(gloss_sim_threshold=0.82, top_n_gloss=3, min_class_size=3)
    out = gloss_similarity_filter([sims_candidate("a", [0.81, 0.81, 0.81])], config)
    assert out[0].dropped_step == 7


def test_gloss_filter_boundary_keep_at_threshold():
    config = small_config(gloss_sim_threshold=0.82, top_n_gloss=3, min_class_size=3)
    out = gloss_similarity_filter([sims_candidate("a", [0.82, 0.82, 0.82])], config)
    assert out[0].active


def test_gloss_filter_constant_high():
    out = gloss_similarity_filter([sims_candidate("a", [0.9, 0.9, 0.9])], small_config())
    assert out[0].active


def test_gloss_filter_missing_sims():
    with pytest.raises(MissingSimilarities):
        gloss_similarity_filter([candidate("a", 3)], small_config())


# -- stage 8: rank and select ---------------------------------------------------------------


def scored_candidate(synset_id, sims):
    return ClassCandidate(
        synset_id=synset_id,
        caption_ids=tuple(range(len(sims))),
        gloss_sims=tuple(0.9 for _ in sims),
        image_class_sims=tuple(sims),
    )


def test_rank_and_select_sort_oracle():
    candidates = [
        scored_candidate("c", [0.7, 0.7, 0.7]),
        scored_candidate("a", [0.9, 0.9, 0.9]),
        scored_candidate("b", [0.8, 0.8, 0.8]),
    ]
    selected, dropped, warnings = rank_and_select(candidates, small_config())
    assert [c.synset_id for c in selected] == ["a", "b"]
    assert [c.synset_id for c in dropped] == ["c"]
    assert warnings == []


def test_rank_and_select_tie_breaks_by_synset_id():
    candidates = [
        scored_candidate("z", [0.8, 0.8, 0.8]),
        scored_candidate("a", [0.8, 0.8, 0.8]),
        scored_candidate("m", [0.8, 0.8, 0.8]),
    ]
    selected, dropped, _ = rank_and_select(candidates, small_config())
    assert [c.synset_id for c in selected] == ["a", "m"]
    assert [c.synset_id for c in dropped] == ["z"]


def test_rank_and_select_exactly_enough():
    candidates = [scored_candidate("a", [0.8] * 3), scored_candidate("b", [0.7] * 3)]
    selected, dropped, warnings = rank_and_select(candidates, small_config())
    assert len(selected) == 2 and not dropped and not warnings


def test_rank_and_select_insufficient_candidates_warns():
    selected, dropped, warnings = rank_and_select(
        [scored_candidate("a", [0.8] * 3)], small_config()
    )
    assert len(selected) == 1
    assert any("InsufficientCandidates" in w for w in warnings)


def test_rank_and_select_requires_enough_pairs():
    with pytest.raises(InsufficientPairs):
        rank_and_select([scored_candidate("a", [0.8, 0.8])], small_config())


# -- assemble -----------------------------------------------------------------------------


def test_assemble_manifest_split_takes_top_by_image_sim(toy_graph):
    config = small_config()
    cand = ClassCandidate(
        synset_id="n.cat",
        caption_ids=(10, 11, 12),
        gloss_sims=(0.9, 0.8, 0.7),
        image_class_sims=(0.5, 0.9, 0.7),
        score=0.7,
    )
    records = {
        rid: CaptionRecord(rid, f"cat {rid}", f"img://{rid}", "s") for rid in (10, 11, 12)
    }
    classes = assemble_manifest([cand], config, records, toy_graph)
    cls = classes[0]
    # sims sort records 11 (0.9), 12 (0.7), 10 (0.5): train = top 2, test = next 1
    assert cls.train_ids() == (11, 12)
    assert cls.test_ids() == (10,)
    assert cls.class_name == "cat"


def test_assemble_manifest_rejects_duplicate_record(toy_graph):
    cand = ClassCandidate(
        synset_id="n.cat",
        caption_ids=(10, 10, 12),
        gloss_sims=(0.9, 0.9, 0.7),
        image_class_sims=(0.5, 0.5, 0.7),
        score=0.5,
    )
    with pytest.raises(DuplicateRecord):
        assemble_manifest([cand], small_config(), {}, toy_graph)


def test_assemble_manifest_insufficient_pairs(toy_graph):
    cand = ClassCandidate(
        synset_id="n.cat",
        caption_ids=(10,),
        gloss_sims=(0.9,),
        image_class_sims=(0.5,),
        score=0.5,
    )
    with pytest.raises(InsufficientPairs):
        assemble_manifest([cand], small_config(), {}, toy_graph)


# -- full funnel on the synthetic desk corpus ------------------------------------------------


def test_desk_pipeline_drop_accounting(desk_manifest):
    assert len(desk_manifest.classes) == 20
    assert desk_manifest.provenance.drop_counts == {1: 0, 2: 3, 3: 1, 4: 1, 5: 2, 6: 1, 7: 4, 8: 18}
    assert desk_manifest.provenance.active_after == {
        1: 50, 2: 47, 3: 46, 4: 45, 5: 43, 6: 42, 7: 38, 8: 20,
    }


def test_desk_pipeline_funnel_monotone(desk_manifest):
    counts = [desk_manifest.provenance.active_after[s] for s in sorted(desk_manifest.provenance.active_after)]
    assert counts == sorted(counts, reverse=True)


def test_desk_pipeline_passes_all_invariants(desk_manifest, desk_inputs):
    records_by_id = {r.record_id: r for r in desk_inputs.records}
    violations = verify_manifest(
        desk_manifest,
        graph=desk_inputs.graph,
        reference=desk_inputs.reference,
        records_by_id=records_by_id,
    )
    assert violations == []


def test_desk_pipeline_gloss_bound_holds(desk_manifest, desk_inputs):
    for cls in desk_manifest.classes:
        assert cls.mean_gloss_sim >= desk_inputs.config.gloss_sim_threshold


def test_desk_pipeline_selection_optimal(desk_manifest):
    scores = desk_manifest.provenance.step8_scores
    selected = [s for s, kept in scores.values() if kept]
    dropped = [s for s, kept in scores.values() if not kept]
    assert max(dropped) <= min(selected)


def test_desk_pipeline_rerun_is_bytewise_identical(desk_manifest, desk_inputs, tmp_path):
    rerun = run_pipeline(
        desk_inputs.records,
        desk_inputs.graph,
        desk_inputs.index,
        desk_inputs.reference,
        desk_inputs.stores,
        desk_inputs.config,
        nsfw_classifier=BlocklistNsfwClassifier(desk_inputs.blocklist),
    )
    a, b = tmp_path / "a.tsv", tmp_path / "b.tsv"
    write_manifest(desk_manifest, a)
    write_manifest(rerun, b)
    assert a.read_bytes() == b.read_bytes()


def test_manifest_file_round_trip(desk_manifest, tmp_path):
    path = tmp_path / "manifest.tsv"
    write_manifest(desk_manifest, path)
    loaded = read_manifest(path)
    assert loaded.config == desk_manifest.config
    assert loaded.class_ids() == desk_manifest.class_ids()
    assert loaded.provenance.drop_counts == desk_manifest.provenance.drop_counts
    assert loaded.provenance.step8_scores == desk_manifest.provenance.step8_scores
    for original, reread in zip(desk_manifest.classes, loaded.classes):
        assert original.train_ids() == reread.train_ids()
        assert original.test_ids() == reread.test_ids()
        assert reread.mean_gloss_sim == pytest.approx(original.mean_gloss_sim)
    # the re-read manifest still satisfies the file-level invariants
    assert verify_manifest(loaded) == []


def test_verify_manifest_catches_tampering(desk_manifest, desk_inputs):
    import copy

    tampered = copy.deepcopy(desk_manifest)
    cls = tampered.classes[0]
    tampered.classes[0] = type(cls)(
        rank=cls.rank,
        synset_id=cls.synset_id,
        class_name=cls.class_name,
        mean_gloss_sim=0.01,  # below threshold
        mean_image_class_sim=cls.mean_image_class_sim,
        pairs=cls.pairs[:-1],  # wrong split size
    )
    violations = verify_manifest(tampered)
    assert any("below threshold" in v for v in violations)
    assert any("test pairs" in v for v in violations)


# -- degenerate whole-pipeline cases -------------------------------------------------------


def tiny_world():
    """Three-class corpus small enough to steer every stage by hand."""
    synsets = [
        make_synset("r", ["rootword"], gloss="top"),
        make_synset("h", ["hubword"], ["r"], gloss="middle"),
        make_synset("x.n", ["xray"], ["h"], gloss="xray gx1 gx2"),
        make_synset("y.n", ["yam"], ["h"], gloss="yam gy1 gy2"),
        make_synset("z.n", ["zebu"], ["h"], gloss="zebu gz1 gz2"),
    ]
    graph = SynsetGraph(synsets)
    index = LemmaIndex.from_graph(graph)
    records = []
    rid = 0
    for lemma, g1, g2 in (("xray", "gx1", "gx2"), ("yam", "gy1", "gy2"), ("zebu", "gz1", "gz2")):
        for j in range(4):
            records.append(CaptionRecord(rid, f"{lemma} {g1} {g2} f{j}", f"img://{rid}", "s"))
            rid += 1
    provider = MockProvider(seed=3, dim=64)
    stores = PipelineStores(
        captions=EmbeddingStore(64, {r.record_id: provider.encode(r.caption) for r in records}),
        glosses=EmbeddingStore(
            64, {stable_text_key(s): provider.encode(graph.synset(s).gloss) for s in graph.synset_ids()}
        ),
        class_names=EmbeddingStore(
            64, {stable_text_key(s): provider.encode(graph.synset(s).lemmas[0]) for s in graph.synset_ids()}
        ),
        images=EmbeddingStore(64, {r.record_id: provider.encode(r.caption) for r in records}),
    )
    config = PipelineConfig(
        min_class_size=4,
        gloss_sim_threshold=0.5,
        top_n_gloss=4,
        pairs_per_class=4,
        num_classes=2,
        train_per_class=3,
        test_per_class=1,
    )
    return records, graph, index, stores, config


def test_reference_covering_all_candidates_yields_warning_not_crash():
    records, graph, index, stores, config = tiny_world()
    reference = [
        ReferenceClass("q.1", frozenset({"xray"})),
        ReferenceClass("q.2", frozenset({"yam"})),
        ReferenceClass("q.3", frozenset({"zebu"})),
    ]
    manifest = run_pipeline(records, graph, index, reference, stores, config)
    assert manifest.classes == []
    assert any("InsufficientCandidates" in w for w in manifest.provenance.warnings)


def test_duplicate_record_rejected_at_intake():
    records, graph, index, stores, config = tiny_world()
    with pytest.raises(DuplicateRecord):
        run_pipeline(records + [records[0]], graph, index, [], stores, config)


def test_nsfw_disabled_skips_stage_five():
    records, graph, index, stores, config = tiny_world()
    config_off = PipelineConfig(
        **{**{f: getattr(config, f) for f in (
            "min_class_size", "gloss_sim_threshold", "top_n_gloss", "pairs_per_class",
            "num_classes", "train_per_class", "test_per_class")},
           "nsfw_enabled": False}
    )
    manifest = run_pipeline(
        records, graph, index, [], stores, config_off,
        nsfw_classifier=BlocklistNsfwClassifier({"xray"}),
    )
    assert manifest.provenance.drop_counts[5] == 0
    assert len(manifest.classes) == 2
