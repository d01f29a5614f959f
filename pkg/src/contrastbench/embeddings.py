"""Unit-norm vector stores, similarity math, and the binary sidecar format.

Sidecar layout (bit-exact, little-endian):

    8 bytes   magic "EMBSIDE1"
    u32       dim
    u64       count
    count *   (u64 id, dim * f32 values), ids strictly ascending

Encoders live out of process: the core only ever reads sidecars. The mock
provider is a deterministic desk-scale stand-in that hashes the token
multiset of a text into dim buckets and normalizes.
"""
from __future__ import annotations

import hashlib
import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .errors import AuditViolation, InputError, ValidationError
from .textnorm import normalize_text, tokenize

logger = logging.getLogger(__name__)

SIDECAR_MAGIC = b"EMBSIDE1"
UNIT_NORM_TOL = 1e-5
_HEADER = struct.Struct("<8sIQ")
_ROW_ID = struct.Struct("<Q")


class DimMismatch(ValidationError):
    pass


class EmptyScores(ValidationError):
    pass


class MissingEmbedding(ValidationError):
    pass


class SidecarError(InputError):
    pass


class BadMagic(SidecarError):
    pass


class TruncatedFile(SidecarError):
    pass


class NormViolation(AuditViolation):
    pass


def similarity(u: np.ndarray, v: np.ndarray) -> float:
    """Inner product of two unit vectors, clamped to [-1, 1]."""
    if u.shape != v.shape:
        raise DimMismatch(f"vector dims differ: {u.shape} vs {v.shape}")
    return float(min(1.0, max(-1.0, float(np.dot(u.astype(np.float64), v.astype(np.float64))))))


def top_n_mean(scores: Iterable[float], n: int) -> float:
    """Mean of the n largest scores; with fewer than n, mean of all (flagged)."""
    scores = list(scores)
    if not scores:
        raise EmptyScores("top_n_mean of an empty score list")
    if n < 1:
        raise ValidationError(f"n must be positive, got {n}")
    if len(scores) < n:
        logger.warning("top_n_mean: only %d scores for n=%d, using all", len(scores), n)
    top = sorted(scores, reverse=True)[:n]
    return float(sum(top) / len(top))


def _check_unit_norm(vector: np.ndarray, label) -> None:
    norm = float(np.linalg.norm(vector.astype(np.float64)))
    if abs(norm - 1.0) > UNIT_NORM_TOL:
        raise NormViolation(f"vector {label} has norm {norm!r}, expected 1.0 +/- {UNIT_NORM_TOL}")


@dataclass
class EmbeddingStore:
    """id -> unit-norm float32 vector map; immutable after construction.

    source_tag is provider provenance and travels in the companion text
    manifest, not in the binary sidecar.
    """

    dim: int
    entries: dict[int, np.ndarray] = field(default_factory=dict)
    source_tag: str = ""

    def validate(self) -> None:
        if self.dim < 1:
            raise ValidationError(f"dim must be positive, got {self.dim}")
        for key, vector in self.entries.items():
            if not 0 <= key < 2**64:
                raise ValidationError(f"id out of 64-bit range: {key}")
            if vector.dtype != np.float32 or vector.shape != (self.dim,):
                raise DimMismatch(f"vector {key} is not float32[{self.dim}]")
            _check_unit_norm(vector, key)

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, key: int) -> bool:
        return key in self.entries

    def ids(self) -> tuple[int, ...]:
        return tuple(sorted(self.entries))

    def vector(self, key: int) -> np.ndarray:
        try:
            return self.entries[key]
        except KeyError:
            raise MissingEmbedding(f"no embedding for id {key}") from None

    def same_entries(self, other: "EmbeddingStore") -> bool:
        if self.dim != other.dim or self.ids() != other.ids():
            return False
        return all(
            self.entries[key].tobytes() == other.entries[key].tobytes() for key in self.entries
        )


def write_sidecar(store: EmbeddingStore, path: Path | str) -> None:
    store.validate()
    path = Path(path)
    with path.open("wb") as handle:
        handle.write(_HEADER.pack(SIDECAR_MAGIC, store.dim, len(store.entries)))
        for key in store.ids():
            handle.write(_ROW_ID.pack(key))
            handle.write(store.entries[key].astype("<f4", copy=False).tobytes())


def read_sidecar(path: Path | str, source_tag: str = "") -> EmbeddingStore:
    path = Path(path)
    if not path.is_file():
        raise InputError(f"sidecar not found: {path}")
    data = path.read_bytes()
    if len(data) < _HEADER.size:
        raise TruncatedFile(f"{path.name}: shorter than the header")
    magic, dim, count = _HEADER.unpack_from(data, 0)
    if magic != SIDECAR_MAGIC:
        raise BadMagic(f"{path.name}: bad magic {magic!r}")
    if dim < 1:
        raise SidecarError(f"{path.name}: invalid dim {dim}")
    row_size = _ROW_ID.size + 4 * dim
    expected = _HEADER.size + count * row_size
    if len(data) < expected:
        raise TruncatedFile(f"{path.name}: expected {expected} bytes, got {len(data)}")
    if len(data) > expected:
        raise SidecarError(f"{path.name}: {len(data) - expected} trailing bytes")
    entries: dict[int, np.ndarray] = {}
    previous = -1
    offset = _HEADER.size
    for _ in range(count):
        (key,) = _ROW_ID.unpack_from(data, offset)
        if key <= previous:
            raise SidecarError(f"{path.name}: ids not strictly ascending at {key}")
        previous = key
        vector = np.frombuffer(data, dtype="<f4", count=dim, offset=offset + _ROW_ID.size).copy()
        _check_unit_norm(vector, key)
        entries[key] = vector
        offset += row_size
    return EmbeddingStore(dim=dim, entries=entries, source_tag=source_tag)


def write_text_manifest(path: Path | str, items: Mapping[int, str], source_tag: str = "") -> None:
    """Companion audit file mapping sidecar id -> original text or uri."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as handle:
        if source_tag:
            handle.write(f"# source_tag: {source_tag}\n")
        for key in sorted(items):
            handle.write(f"{key}\t{items[key]}\n")


def stable_text_key(text: str) -> int:
    """Platform-stable 64-bit id for keying non-numeric entities in sidecars."""
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


class MockProvider:
    """Deterministic text-to-unit-vector encoder for desk-scale runs.

    Each token of the normalized text hashes (with the seed) to one of dim
    buckets with a +/-1 sign; the accumulated bucket vector is normalized.
    Same seed and text give the same vector on every platform.
    """

    def __init__(self, seed: int, dim: int):
        if dim < 2:
            raise ValidationError(f"mock provider needs dim >= 2, got {dim}")
        if not 0 <= seed < 2**64:
            raise ValidationError(f"seed out of 64-bit range: {seed}")
        self.seed = seed
        self.dim = dim
        self._seed_bytes = seed.to_bytes(8, "little")

    @property
    def source_tag(self) -> str:
        return f"mock-hash:dim={self.dim},seed={self.seed}"

    def _accumulate(self, token: str, buckets: np.ndarray) -> None:
        digest = hashlib.sha256(self._seed_bytes + token.encode("utf-8")).digest()
        bucket = int.from_bytes(digest[:8], "little") % self.dim
        sign = 1.0 if digest[8] % 2 == 0 else -1.0
        buckets[bucket] += sign

    def encode(self, text: str) -> np.ndarray:
        tokens = tokenize(normalize_text(text))
        buckets = np.zeros(self.dim, dtype=np.float64)
        for token in tokens:
            self._accumulate(token, buckets)
        if not tokens or not buckets.any():
            # Empty or fully cancelled token multiset: fall back to a fixed token.
            self._accumulate("", buckets)
        return (buckets / np.linalg.norm(buckets)).astype(np.float32)


def store_from_texts(
    provider: MockProvider, items: Iterable[tuple[int, str]], source_tag: str | None = None
) -> EmbeddingStore:
    entries = {key: provider.encode(text) for key, text in items}
    return EmbeddingStore(
        dim=provider.dim,
        entries=entries,
        source_tag=provider.source_tag if source_tag is None else source_tag,
    )
