"""Tokenizers used to enforce the chunk token limit.

Chunk boundaries are defined in token space but must map back to exact byte
offsets in the source file, so every tokenizer here is *lossless*: the
concatenation of the returned pieces reproduces the input string exactly.
The tokenizer name is recorded in the snapshot manifest; counts are only
comparable between corpora built with the same tokenizer.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Protocol

__all__ = ["Tokenizer", "PieceTokenizer", "WhitespaceTokenizer", "get_tokenizer",
           "register_tokenizer", "DEFAULT_TOKENIZER"]


class Tokenizer(Protocol):
    name: str

    def pieces(self, text: str) -> list[str]:
        """Split text into tokens such that ''.join(pieces) == text."""
        ...

    def count(self, text: str) -> int:
        ...


# Partition into runs of one category each: whitespace, alphanumerics,
# underscores, remaining symbols. Every character matches exactly one branch.
_RUN = re.compile(r"\s+|[^\W_]+|_+|[^\s\w]+")


@dataclass(frozen=True)
class PieceTokenizer:
    """Category-run tokenizer with a subword-style cap on run length.

    Long identifiers, URLs and base64 blobs count as several tokens instead
    of one, which keeps the 2048-token chunk bound meaningful for code.
    """

    max_piece_chars: int = 16

    @property
    def name(self) -> str:
        return f"piece-{self.max_piece_chars}"

    def pieces(self, text: str) -> list[str]:
        cap = self.max_piece_chars
        out: list[str] = []
        for run in _RUN.findall(text):
            if len(run) <= cap:
                out.append(run)
            else:
                out.extend(run[i:i + cap] for i in range(0, len(run), cap))
        return out

    def count(self, text: str) -> int:
        return len(self.pieces(text))


_WS_RUN = re.compile(r"\s+|\S+")


@dataclass(frozen=True)
class WhitespaceTokenizer:
    """Whitespace/non-whitespace runs; coarser than the default."""

    name: str = "whitespace"

    def pieces(self, text: str) -> list[str]:
        return _WS_RUN.findall(text)

    def count(self, text: str) -> int:
        return len(self.pieces(text))


DEFAULT_TOKENIZER = PieceTokenizer()

_REGISTRY: dict[str, Tokenizer] = {
    DEFAULT_TOKENIZER.name: DEFAULT_TOKENIZER,
    "whitespace": WhitespaceTokenizer(),
}


def register_tokenizer(tokenizer: Tokenizer) -> None:
    _REGISTRY[tokenizer.name] = tokenizer


def get_tokenizer(name: str) -> Tokenizer:
    try:
        return _REGISTRY[name]
    except KeyError:
        raise KeyError(
            f"unknown tokenizer {name!r}; registered: {sorted(_REGISTRY)}") from None
