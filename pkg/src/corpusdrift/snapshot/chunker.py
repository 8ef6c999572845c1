"""Split source files into byte-addressed, token-bounded document chunks.

Splitting prefers structural boundaries (markdown headings, top-level code
definitions, notebook cells) and falls back to fixed token windows.  Byte
offsets always refer to the original file bytes; chunk text is decoded with
lossy replacement so the emitted corpus is valid UTF-8 even when the source
is not.
"""

from __future__ import annotations

import bisect
import json
import re
from pathlib import Path

from .documents import DocumentChunk
from .tokenizers import DEFAULT_TOKENIZER, Tokenizer

__all__ = ["chunk_file", "chunk_text", "is_notebook", "DEFAULT_TOKEN_LIMIT"]

DEFAULT_TOKEN_LIMIT = 2048

_MARKDOWN_EXT = {".md", ".mdx", ".markdown"}
_CODE_EXT = {".py", ".js", ".jsx", ".ts", ".tsx", ".java", ".go", ".rb",
             ".rs", ".c", ".h", ".cc", ".cpp", ".hpp", ".cs", ".php",
             ".scala", ".kt", ".swift", ".sh"}

_HEADING = re.compile(r"^#{1,6} ")
# Non-indented lines opening a top-level definition in common languages.
_TOP_LEVEL_DEF = re.compile(
    r"^(?:async\s+def|def|class|function|func|fn|export|interface|"
    r"struct|impl|enum|pub|type|package|fun)\b")


def is_notebook(path: str | Path) -> bool:
    return str(path).endswith(".ipynb")


def chunk_file(path: str | Path, repo: str, rel_path: str,
               tokenizer: Tokenizer = DEFAULT_TOKENIZER,
               limit: int = DEFAULT_TOKEN_LIMIT) -> list[DocumentChunk]:
    """Chunk one file into DocumentChunks; empty file yields []."""
    raw = Path(path).read_bytes()
    if not raw:
        return []
    if is_notebook(rel_path):
        return _chunk_notebook(raw, repo, rel_path, tokenizer, limit)
    # surrogateescape keeps the bytes<->str mapping exact for offset math
    text = raw.decode("utf-8", "surrogateescape")
    suffix = Path(rel_path).suffix.lower()
    if suffix in _MARKDOWN_EXT:
        boundary = _HEADING
    elif suffix in _CODE_EXT:
        boundary = _TOP_LEVEL_DEF
    else:
        boundary = None  # plain text and config files: fixed windows only
    return chunk_text(text, raw, repo, rel_path, tokenizer, limit, boundary)


def chunk_text(text: str, raw: bytes, repo: str, rel_path: str,
               tokenizer: Tokenizer, limit: int,
               boundary: re.Pattern | None) -> list[DocumentChunk]:
    if not text:
        return []
    pieces = tokenizer.pieces(text)
    byte_off = _piece_byte_offsets(pieces)

    # Structural boundaries, expressed as piece indices.
    cuts = {0, len(pieces)}
    if boundary is not None:
        for off in _line_start_offsets(text, boundary):
            cuts.add(_piece_index_at(byte_off, off))
    cut_list = sorted(cuts)

    # Greedy assembly of sections into chunks, hard-windowing oversized ones.
    spans: list[tuple[int, int]] = []
    start = cut_list[0]
    for lo, hi in zip(cut_list, cut_list[1:]):
        if hi - start <= limit:
            continue
        if lo > start:
            spans.append((start, lo))
            start = lo
        while hi - start > limit:
            spans.append((start, start + limit))
            start += limit
    if start < len(pieces):
        spans.append((start, len(pieces)))

    chunks = []
    for a, b in spans:
        bs, be = byte_off[a], byte_off[b]
        chunks.append(DocumentChunk.build(
            repo, rel_path, bs, be, b - a, raw[bs:be].decode("utf-8", "replace")))
    return chunks


def _piece_byte_offsets(pieces: list[str]) -> list[int]:
    """Cumulative byte offsets; byte_off[i] is where piece i starts."""
    off = [0]
    pos = 0
    for piece in pieces:
        pos += len(piece.encode("utf-8", "surrogateescape"))
        off.append(pos)
    return off


def _line_start_offsets(text: str, pattern: re.Pattern) -> list[int]:
    """Byte offsets of line starts whose line matches the pattern."""
    offsets = []
    byte_pos = 0
    for line in text.splitlines(keepends=True):
        if pattern.match(line):
            offsets.append(byte_pos)
        byte_pos += len(line.encode("utf-8", "surrogateescape"))
    return offsets


def _piece_index_at(byte_off: list[int], offset: int) -> int:
    """Index of the first piece starting at or after the byte offset."""
    return bisect.bisect_left(byte_off, offset)


# --- Notebooks ---
#
# Cells are extracted in order with percent-style delimiters and outputs
# dropped.  Byte offsets refer to the serialized cell regions of the raw
# notebook file; a chunk covering cells i..j spans from the start of cell i
# to the end of cell j.


def _chunk_notebook(raw: bytes, repo: str, rel_path: str,
                    tokenizer: Tokenizer, limit: int) -> list[DocumentChunk]:
    try:
        nb = json.loads(raw.decode("utf-8", "replace"))
        cells = nb["cells"]
        spans = _cell_byte_spans(raw)
        if not isinstance(cells, list) or len(spans) != len(cells):
            raise ValueError("cell spans do not line up")
    except (KeyError, TypeError, ValueError):
        # Not a well-formed notebook: fall back to plain windowed chunking.
        text = raw.decode("utf-8", "surrogateescape")
        return chunk_text(text, raw, repo, rel_path, tokenizer, limit, None)

    extracted: list[tuple[int, int, str, int]] = []  # (start, end, text, tokens)
    for cell, (start, end) in zip(cells, spans):
        source = cell.get("source", "")
        if isinstance(source, list):
            source = "".join(source)
        if not source.strip():
            continue
        kind = cell.get("cell_type", "code")
        marker = "# %% [markdown]" if kind == "markdown" else "# %%"
        text = f"{marker}\n{source}"
        extracted.append((start, end, text, tokenizer.count(text)))
    if not extracted:
        return []

    chunks: list[DocumentChunk] = []
    group: list[tuple[int, int, str, int]] = []
    group_tokens = 0

    def flush() -> None:
        nonlocal group, group_tokens
        if group:
            bs, be = group[0][0], group[-1][1]
            text = "\n".join(g[2] for g in group)
            chunks.append(DocumentChunk.build(repo, rel_path, bs, be, group_tokens, text))
            group, group_tokens = [], 0

    for start, end, text, tokens in extracted:
        if tokens > limit:
            flush()
            chunks.extend(_split_oversized_cell(
                start, end, text, repo, rel_path, tokenizer, limit))
            continue
        if group_tokens + tokens > limit:
            flush()
        group.append((start, end, text, tokens))
        group_tokens += tokens
    flush()
    return chunks


def _split_oversized_cell(start: int, end: int, text: str, repo: str,
                          rel_path: str, tokenizer: Tokenizer,
                          limit: int) -> list[DocumentChunk]:
    """Window an oversized cell, partitioning its raw byte span pro rata.

    The raw span is divided in proportion to each window's share of the
    extracted text, keeping ranges ordered, non-overlapping and in-file.
    """
    pieces = tokenizer.pieces(text)
    windows = [pieces[i:i + limit] for i in range(0, len(pieces), limit)]
    sizes = [sum(len(p.encode("utf-8")) for p in w) for w in windows]
    total = sum(sizes)
    span = end - start
    chunks = []
    prev = start
    cum = 0
    for i, window in enumerate(windows):
        cum += sizes[i]
        hi = end if i == len(windows) - 1 else max(prev + 1, start + span * cum // total)
        hi = min(hi, end)
        chunks.append(DocumentChunk.build(
            repo, rel_path, prev, hi, len(window), "".join(window)))
        prev = hi
    return chunks


def _cell_byte_spans(raw: bytes) -> list[tuple[int, int]]:
    """Byte spans of the top-level objects in the notebook's "cells" array."""
    key = raw.find(b'"cells"')
    if key < 0:
        raise ValueError("no cells array")
    open_bracket = raw.find(b"[", key)
    if open_bracket < 0:
        raise ValueError("no cells array")
    spans = []
    depth = 0
    in_string = False
    escaped = False
    obj_start = -1
    i = open_bracket + 1
    while i < len(raw):
        c = raw[i]
        if in_string:
            if escaped:
                escaped = False
            elif c == 0x5C:  # backslash
                escaped = True
            elif c == 0x22:  # quote
                in_string = False
        elif c == 0x22:
            in_string = True
        elif c == 0x7B:  # {
            if depth == 0:
                obj_start = i
            depth += 1
        elif c == 0x7D:  # }
            depth -= 1
            if depth == 0:
                spans.append((obj_start, i + 1))
        elif c == 0x5D and depth == 0:  # ] closing the cells array
            return spans
        i += 1
    raise ValueError("unterminated cells array")
