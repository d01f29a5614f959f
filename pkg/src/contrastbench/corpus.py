"""Streaming reader for tab-separated caption corpora.

Corpus file format: UTF-8, one record per line, tab-separated fields in the
order record_id, caption, image_uri, shard. record_id is decimal. Tabs are
not permitted inside fields, so any line without exactly four fields is
malformed. Malformed lines are skipped and counted, never fatal; web-crawled
corpora are dirty by construction.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

from .errors import InputError, ValidationError
from .textnorm import normalize_text

logger = logging.getLogger(__name__)

FORMAT_TAGS = ("line-delimited-records",)
_MAX_RECORD_ID = 2**64 - 1


class MissingFile(InputError):
    pass


class UnknownFormat(ValidationError):
    pass


def normalize_caption(text: str) -> str:
    """Lowercase, NFC-compose, trim, and collapse interior whitespace."""
    return normalize_text(text)


@dataclass(frozen=True)
class CaptionRecord:
    record_id: int
    caption: str
    image_uri: str
    shard: str


class CorpusStream:
    """Single-consumer iterator over corpus records.

    `count`, `skipped`, and `skipped_lines` are final once iteration ends.
    Duplicate record_ids are treated as malformed (first occurrence wins).
    """

    def __init__(self, path: Path | str, format_tag: str = "line-delimited-records"):
        if format_tag not in FORMAT_TAGS:
            raise UnknownFormat(f"unknown corpus format tag: {format_tag!r}")
        self.path = Path(path)
        if not self.path.is_file():
            raise MissingFile(f"corpus file not found: {self.path}")
        self.format_tag = format_tag
        self.count = 0
        self.skipped = 0
        self.skipped_lines: list[int] = []
        self._consumed = False

    def __iter__(self) -> Iterator[CaptionRecord]:
        if self._consumed:
            raise ValidationError("corpus stream is single-consumer; reopen to re-read")
        self._consumed = True
        seen: set[int] = set()
        with self.path.open("r", encoding="utf-8") as handle:
            for lineno, line in enumerate(handle, 1):
                record = self._parse(line.rstrip("\r\n"), lineno, seen)
                if record is None:
                    continue
                seen.add(record.record_id)
                self.count += 1
                yield record
        logger.info("corpus %s: %d records, %d skipped", self.path.name, self.count, self.skipped)

    def _parse(self, line: str, lineno: int, seen: set[int]) -> CaptionRecord | None:
        fields = line.split("\t")
        if len(fields) != 4:
            return self._skip(lineno, f"expected 4 tab-separated fields, got {len(fields)}")
        raw_id, caption, image_uri, shard = fields
        try:
            record_id = int(raw_id, 10)
        except ValueError:
            return self._skip(lineno, f"record_id is not decimal: {raw_id!r}")
        if not 0 <= record_id <= _MAX_RECORD_ID:
            return self._skip(lineno, f"record_id out of 64-bit range: {record_id}")
        if record_id in seen:
            return self._skip(lineno, f"duplicate record_id {record_id}")
        if not normalize_caption(caption):
            return self._skip(lineno, "caption empty after normalization")
        return CaptionRecord(record_id=record_id, caption=caption, image_uri=image_uri, shard=shard)

    def _skip(self, lineno: int, reason: str) -> None:
        self.skipped += 1
        self.skipped_lines.append(lineno)
        logger.warning("malformed record at line %d: %s", lineno, reason)
        return None


def open_corpus(path: Path | str, format_tag: str = "line-delimited-records") -> CorpusStream:
    """Open a corpus file for one streaming pass."""
    return CorpusStream(path, format_tag)
