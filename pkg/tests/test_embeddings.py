from __future__ import annotations

import struct

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from contrastbench.embeddings import (
    BadMagic,
    DimMismatch,
    EmbeddingStore,
    EmptyScores,
    MissingEmbedding,
    MockProvider,
    NormViolation,
    SidecarError,
    TruncatedFile,
    UNIT_NORM_TOL,
    read_sidecar,
    similarity,
    stable_text_key,
    store_from_texts,
    top_n_mean,
    write_sidecar,
    write_text_manifest,
)
from contrastbench.errors import ValidationError

SIDECAR_HEADER = struct.Struct("<8sIQ")


def unit(values):
    v = np.asarray(values, dtype=np.float64)
    return (v / np.linalg.norm(v)).astype(np.float32)


def make_store(vectors, dim=None, tag="test"):
    dim = dim or len(next(iter(vectors.values())))
    return EmbeddingStore(dim=dim, entries={k: np.asarray(v, np.float32) for k, v in vectors.items()}, source_tag=tag)


# -- similarity ---------------------------------------------------------------


def test_similarity_identity():
    u = unit([0.3, 0.4, 0.5])
    assert similarity(u, u) == pytest.approx(1.0, abs=1e-6)


def test_similarity_orthogonal():
    assert similarity(unit([1, 0]), unit([0, 1])) == 0.0


def test_similarity_hand_value():
    # (0.6, 0.8) . (0.8, 0.6) = 0.48 + 0.48 = 0.96
    u = np.array([0.6, 0.8], dtype=np.float32)
    v = np.array([0.8, 0.6], dtype=np.float32)
    assert similarity(u, v) == pytest.approx(0.96, abs=1e-7)


def test_similarity_dim_mismatch():
    with pytest.raises(DimMismatch):
        similarity(unit([1, 0]), unit([1, 0, 0]))


@given(
    st.lists(st.floats(-1, 1), min_size=6, max_size=6),
    st.lists(st.floats(-1, 1), min_size=6, max_size=6),
)
def test_similarity_symmetric_and_bounded(a, b):
    assume(sum(x * x for x in a) > 1e-6)  # unit() needs a nonzero vector
    assume(sum(x * x for x in b) > 1e-6)
    u, v = unit(a), unit(b)
    assert similarity(u, v) == similarity(v, u)
    assert -1.0 <= similarity(u, v) <= 1.0
    assert similarity(u, u) == pytest.approx(1.0, abs=1e-6)


# -- top_n_mean ----------------------------------------------------------------


def test_top_n_mean_sort_oracle():
    assert top_n_mean([0.9, 0.5, 0.7], 2) == pytest.approx(0.8)


def test_top_n_mean_n_larger_than_list():
    assert top_n_mean([0.2, 0.4], 10) == pytest.approx(0.3)


def test_top_n_mean_constant():
    assert top_n_mean([0.37] * 5, 3) == pytest.approx(0.37)


def test_top_n_mean_empty():
    with pytest.raises(EmptyScores):
        top_n_mean([], 3)


def test_top_n_mean_bad_n():
    with pytest.raises(ValidationError):
        top_n_mean([0.1], 0)


@given(st.lists(st.floats(-1, 1), min_size=1, max_size=30), st.integers(1, 40), st.randoms())
def test_top_n_mean_permutation_invariant(scores, n, rng):
    shuffled = list(scores)
    rng.shuffle(shuffled)
    assert top_n_mean(scores, n) == pytest.approx(top_n_mean(shuffled, n))


# -- sidecar format -------------------------------------------------------------


def test_sidecar_round_trip(tmp_path):
    store = make_store({1: unit([1, 2, 3]), 9: unit([0.5, -1, 2]), 2**40: unit([-1, -1, 1])})
    path = tmp_path / "v.emb"
    write_sidecar(store, path)
    loaded = read_sidecar(path)
    assert loaded.dim == store.dim
    assert loaded.ids() == store.ids()
    assert loaded.same_entries(store)


def test_sidecar_bytes_stable_across_writes(tmp_path):
    store = make_store({i: unit([i + 1, 1, 0.5]) for i in range(10)})
    a, b = tmp_path / "a.emb", tmp_path / "b.emb"
    write_sidecar(store, a)
    write_sidecar(store, b)
    assert a.read_bytes() == b.read_bytes()


def test_sidecar_truncated(tmp_path):
    store = make_store({1: unit([1, 2]), 2: unit([2, 1])})
    path = tmp_path / "v.emb"
    write_sidecar(store, path)
    data = path.read_bytes()
    path.write_bytes(data[:-3])
    with pytest.raises(TruncatedFile):
        read_sidecar(path)


def test_sidecar_bad_magic(tmp_path):
    path = tmp_path / "v.emb"
    path.write_bytes(b"NOTMAGIC" + b"\x00" * 12)
    with pytest.raises(BadMagic):
        read_sidecar(path)


def test_sidecar_norm_violation_names_offender(tmp_path):
    path = tmp_path / "v.emb"
    bad = np.array([2.0, 0.0], dtype="<f4")
    payload = SIDECAR_HEADER.pack(b"EMBSIDE1", 2, 1) + struct.pack("<Q", 77) + bad.tobytes()
    path.write_bytes(payload)
    with pytest.raises(NormViolation, match="77"):
        read_sidecar(path)


def test_sidecar_unsorted_ids_rejected(tmp_path):
    path = tmp_path / "v.emb"
    row = lambda rid: struct.pack("<Q", rid) + unit([1, 1]).astype("<f4").tobytes()
    path.write_bytes(SIDECAR_HEADER.pack(b"EMBSIDE1", 2, 2) + row(5) + row(3))
    with pytest.raises(SidecarError):
        read_sidecar(path)


def test_sidecar_trailing_bytes_rejected(tmp_path):
    store = make_store({1: unit([1, 2])})
    path = tmp_path / "v.emb"
    write_sidecar(store, path)
    path.write_bytes(path.read_bytes() + b"xx")
    with pytest.raises(SidecarError):
        read_sidecar(path)


@settings(max_examples=30)
@given(
    st.dictionaries(
        st.integers(min_value=0, max_value=2**64 - 1),
        st.lists(st.floats(-5, 5), min_size=4, max_size=4).filter(
            lambda v: sum(x * x for x in v) > 1e-4
        ),
        min_size=1,
        max_size=12,
    )
)
def test_sidecar_round_trip_preserves_every_byte(tmp_path_factory, entries):
    tmp = tmp_path_factory.mktemp("sc")
    store = make_store({k: unit(v) for k, v in entries.items()}, dim=4)
    path = tmp / "v.emb"
    write_sidecar(store, path)
    loaded = read_sidecar(path)
    for key in store.entries:
        assert loaded.entries[key].tobytes() == store.entries[key].tobytes()


def test_store_vector_missing():
    store = make_store({1: unit([1, 0])})
    with pytest.raises(MissingEmbedding):
        store.vector(2)


def test_write_rejects_non_unit_store(tmp_path):
    store = make_store({1: np.array([2.0, 0.0], dtype=np.float32)})
    with pytest.raises(NormViolation):
        write_sidecar(store, tmp_path / "v.emb")


def test_text_manifest(tmp_path):
    path = tmp_path / "texts.tsv"
    write_text_manifest(path, {2: "beta", 1: "alpha"}, source_tag="mock")
    lines = path.read_text().splitlines()
    assert lines[0] == "# source_tag: mock"
    assert lines[1:] == ["1\talpha", "2\tbeta"]


# -- mock provider ---------------------------------------------------------------


def test_mock_provider_deterministic():
    provider = MockProvider(seed=7, dim=64)
    again = MockProvider(seed=7, dim=64)
    text = "a red sports car"
    assert np.array_equal(provider.encode(text), again.encode(text))


def test_mock_provider_self_similarity():
    provider = MockProvider(seed=7, dim=64)
    v = provider.encode("wolf pack howling")
    assert similarity(v, v) == pytest.approx(1.0, abs=1e-6)


def test_mock_provider_disjoint_tokens_near_orthogonal():
    provider = MockProvider(seed=3, dim=512)
    pairs = [
        ("crimson gable house", "orbital weather station"),
        ("quiet river stone", "electric guitar solo"),
        ("paper crane folded", "diesel engine manual"),
    ]
    for left, right in pairs:
        sim = similarity(provider.encode(left), provider.encode(right))
        assert abs(sim) < 0.2


def test_mock_provider_unit_norm_and_seed_sensitivity():
    provider = MockProvider(seed=1, dim=32)
    other = MockProvider(seed=2, dim=32)
    v = provider.encode("token soup")
    assert abs(float(np.linalg.norm(v.astype(np.float64))) - 1.0) < UNIT_NORM_TOL
    assert not np.array_equal(v, other.encode("token soup"))


def test_mock_provider_empty_text_is_deterministic_unit():
    provider = MockProvider(seed=5, dim=16)
    v = provider.encode("")
    assert np.array_equal(v, provider.encode("   "))
    assert abs(float(np.linalg.norm(v.astype(np.float64))) - 1.0) < UNIT_NORM_TOL


def test_mock_provider_dim_too_small():
    with pytest.raises(ValidationError):
        MockProvider(seed=1, dim=1)


def test_store_from_texts_and_tag():
    provider = MockProvider(seed=7, dim=16)
    store = store_from_texts(provider, [(1, "alpha"), (2, "beta")])
    assert store.source_tag == "mock-hash:dim=16,seed=7"
    assert len(store) == 2
    store.validate()


def test_stable_text_key_deterministic_and_distinct():
    assert stable_text_key("car.n.01") == stable_text_key("car.n.01")
    assert stable_text_key("car.n.01") != stable_text_key("car.n.02")
    assert 0 <= stable_text_key("anything") < 2**64
