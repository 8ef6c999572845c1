"""Inverted-index BM25 retrieval over a snapshot corpus.

Scoring uses the Okapi BM25 variant with a non-negative idf:

    idf(t)     = ln(1 + (N - df + 0.5) / (df + 0.5))
    score(d,q) = sum over distinct query terms t of
                 qtf(t) * idf(t) * tf * (k1 + 1) / (tf + k1*(1 - b + b*dl/avgdl))

with defaults k1 = 0.9, b = 0.4.  Ties are broken by doc_id ascending so
runs are reproducible across platforms.
"""

from __future__ import annotations

import json
import math
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

from ._kernels import bm25_accumulate
from .errors import DuplicateDocIdError
from .runs import RunList

__all__ = ["DEFAULT_B", "DEFAULT_K1", "InvertedIndex", "bm25_search",
           "build_index", "tokenize_lexical"]

DEFAULT_K1 = 0.9
DEFAULT_B = 0.4

# Unicode alphanumeric runs (underscore splits, digits kept).
_LEX_TOKEN = re.compile(r"[^\W_]+")


def tokenize_lexical(text: str) -> list[str]:
    """Lowercased alphanumeric terms; deterministic."""
    return _LEX_TOKEN.findall(text.lower())


@dataclass
class InvertedIndex:
    """Immutable postings in CSR layout plus the doc table.

    postings for term t live at [offsets[tid], offsets[tid+1]) in
    post_ordinals / post_tfs, sorted by document ordinal.
    """

    doc_ids: list[str]
    doc_lengths: np.ndarray          # float64 [N]
    terms: list[str]                 # sorted; term id = position
    offsets: np.ndarray              # int64 [T+1]
    post_ordinals: np.ndarray        # int32 [P]
    post_tfs: np.ndarray             # float64 [P]
    _vocab: dict[str, int] = field(repr=False, default_factory=dict)
    _norm_cache: dict[tuple[float, float], np.ndarray] = field(repr=False, default_factory=dict)

    def __post_init__(self) -> None:
        if not self._vocab:
            self._vocab = {t: i for i, t in enumerate(self.terms)}

    @property
    def num_docs(self) -> int:
        return len(self.doc_ids)

    @property
    def avg_doc_length(self) -> float:
        return float(self.doc_lengths.mean()) if len(self.doc_ids) else 0.0

    def doc_frequency(self, term: str) -> int:
        tid = self._vocab.get(term)
        if tid is None:
            return 0
        return int(self.offsets[tid + 1] - self.offsets[tid])

    def postings(self, term: str) -> list[tuple[int, int]]:
        tid = self._vocab.get(term)
        if tid is None:
            return []
        lo, hi = self.offsets[tid], self.offsets[tid + 1]
        return [(int(o), int(tf)) for o, tf in
                zip(self.post_ordinals[lo:hi], self.post_tfs[lo:hi])]

    def length_norms(self, k1: float, b: float) -> np.ndarray:
        """k1 * (1 - b + b * dl/avgdl) per document, cached per (k1, b)."""
        key = (k1, b)
        norms = self._norm_cache.get(key)
        if norms is None:
            avgdl = self.avg_doc_length
            rel = self.doc_lengths / avgdl if avgdl > 0 else np.zeros_like(self.doc_lengths)
            norms = k1 * (1.0 - b + b * rel)
            self._norm_cache[key] = norms
        return norms

    def save(self, path: str | Path) -> None:
        meta = json.dumps({"doc_ids": self.doc_ids, "terms": self.terms})
        np.savez_compressed(
            Path(path),
            doc_lengths=self.doc_lengths,
            offsets=self.offsets,
            post_ordinals=self.post_ordinals,
            post_tfs=self.post_tfs,
            meta=np.frombuffer(meta.encode("utf-8"), dtype=np.uint8),
        )

    @classmethod
    def load(cls, path: str | Path) -> InvertedIndex:
        with np.load(Path(path)) as data:
            meta = json.loads(bytes(data["meta"]).decode("utf-8"))
            return cls(
                doc_ids=meta["doc_ids"],
                doc_lengths=data["doc_lengths"],
                terms=meta["terms"],
                offsets=data["offsets"],
                post_ordinals=data["post_ordinals"],
                post_tfs=data["post_tfs"],
            )


def build_index(corpus: Iterable) -> InvertedIndex:
    """Build an index from a stream of objects with .doc_id and .text."""
    doc_ids: list[str] = []
    lengths: list[int] = []
    postings: dict[str, list[tuple[int, int]]] = {}
    seen: set[str] = set()

    for doc in corpus:
        doc_id, text = doc.doc_id, doc.text
        if doc_id in seen:
            raise DuplicateDocIdError(doc_id)
        seen.add(doc_id)
        ordinal = len(doc_ids)
        doc_ids.append(doc_id)
        terms = tokenize_lexical(text)
        lengths.append(len(terms))
        for term, tf in Counter(terms).items():
            postings.setdefault(term, []).append((ordinal, tf))

    terms_sorted = sorted(postings)
    offsets = np.zeros(len(terms_sorted) + 1, dtype=np.int64)
    total = sum(len(postings[t]) for t in terms_sorted)
    ordinals = np.empty(total, dtype=np.int32)
    tfs = np.empty(total, dtype=np.float64)
    pos = 0
    for tid, term in enumerate(terms_sorted):
        plist = postings[term]  # already ordinal-sorted: docs arrive in order
        for ordinal, tf in plist:
            ordinals[pos] = ordinal
            tfs[pos] = tf
            pos += 1
        offsets[tid + 1] = pos

    return InvertedIndex(
        doc_ids=doc_ids,
        doc_lengths=np.asarray(lengths, dtype=np.float64),
        terms=terms_sorted,
        offsets=offsets,
        post_ordinals=ordinals,
        post_tfs=tfs,
    )


def bm25_search(index: InvertedIndex, query: str, k: int, *, query_id: str = "",
                k1: float = DEFAULT_K1, b: float = DEFAULT_B,
                tag: str = "bm25") -> RunList:
    """Top-k documents by BM25; docs sharing no term with the query are dropped."""
    if k < 1:
        raise ValueError("k must be >= 1")
    counts = Counter(tokenize_lexical(query))
    n = index.num_docs
    if n == 0 or not counts:
        return RunList(query_id=query_id, tag=tag)

    scores = np.zeros(n, dtype=np.float64)
    norms = index.length_norms(k1, b)
    k1_plus_1 = k1 + 1.0
    matched = False
    for term in sorted(counts):  # fixed order keeps accumulation deterministic
        tid = index._vocab.get(term)
        if tid is None:
            continue
        lo, hi = int(index.offsets[tid]), int(index.offsets[tid + 1])
        df = hi - lo
        idf = math.log(1.0 + (n - df + 0.5) / (df + 0.5))
        weight = counts[term] * idf
        bm25_accumulate(scores, index.post_ordinals[lo:hi],
                        index.post_tfs[lo:hi], weight, k1_plus_1, norms)
        matched = True
    if not matched:
        return RunList(query_id=query_id, tag=tag)

    positive = np.flatnonzero(scores > 0.0)
    if len(positive) > k:
        # preselect candidates by score, keeping every tie at the kth value
        # so the doc_id tie-break below stays exact
        pos_scores = scores[positive]
        kth = np.partition(pos_scores, len(pos_scores) - k)[len(pos_scores) - k]
        positive = positive[pos_scores >= kth]
    ranked = sorted(((index.doc_ids[i], float(scores[i])) for i in positive),
                    key=lambda e: (-e[1], e[0]))
    return RunList(query_id=query_id, entries=ranked[:k], tag=tag)
