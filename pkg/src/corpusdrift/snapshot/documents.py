"""Corpus document chunks and their on-disk JSONL form."""

from __future__ import annotations

import json
import re
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable, Iterator

__all__ = ["DocumentChunk", "format_doc_id", "parse_doc_id",
           "read_corpus", "write_corpus"]

_DOC_ID = re.compile(r"^([^/]+)/(.+):(\d+)-(\d+)$")

# doc_ids appear in whitespace-delimited TREC files, so any whitespace in a
# file path is %-escaped. Encoding '%' first / decoding it last keeps the
# mapping bijective; paths without whitespace are unchanged.
_PATH_ESCAPES = [("%", "%25"), (" ", "%20"), ("\t", "%09"),
                 ("\n", "%0A"), ("\r", "%0D")]


def _encode_path(path: str) -> str:
    for char, escape in _PATH_ESCAPES:
        path = path.replace(char, escape)
    return path


def _decode_path(encoded: str) -> str:
    for char, escape in reversed(_PATH_ESCAPES):
        encoded = encoded.replace(escape, char)
    return encoded


def format_doc_id(repo: str, path: str, byte_start: int, byte_end: int) -> str:
    return f"{repo}/{_encode_path(path)}:{byte_start}-{byte_end}"


def parse_doc_id(doc_id: str) -> tuple[str, str, int, int]:
    """Invert format_doc_id; raises ValueError for malformed ids."""
    m = _DOC_ID.match(doc_id)
    if m is None:
        raise ValueError(f"malformed doc_id: {doc_id!r}")
    repo, path, start, end = m.groups()
    return repo, _decode_path(path), int(start), int(end)


@dataclass
class DocumentChunk:
    """One corpus unit: a byte-addressed slice of a repository file."""

    doc_id: str
    repo: str
    path: str
    byte_start: int
    byte_end: int
    token_count: int
    text: str

    @classmethod
    def build(cls, repo: str, path: str, byte_start: int, byte_end: int,
              token_count: int, text: str) -> DocumentChunk:
        return cls(
            doc_id=format_doc_id(repo, path, byte_start, byte_end),
            repo=repo,
            path=path,
            byte_start=byte_start,
            byte_end=byte_end,
            token_count=token_count,
            text=text,
        )

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, ensure_ascii=False)

    @classmethod
    def from_dict(cls, rec: dict) -> DocumentChunk:
        return cls(**{k: rec[k] for k in (
            "doc_id", "repo", "path", "byte_start", "byte_end", "token_count", "text")})


def write_corpus(chunks: Iterable[DocumentChunk], path: str | Path) -> int:
    """Write one chunk per line; returns the number of lines written."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    n = 0
    with path.open("w", encoding="utf-8") as fh:
        for chunk in chunks:
            fh.write(chunk.to_json())
            fh.write("\n")
            n += 1
    return n


def read_corpus(path: str | Path) -> Iterator[DocumentChunk]:
    with Path(path).open("r", encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                yield DocumentChunk.from_dict(json.loads(line))
