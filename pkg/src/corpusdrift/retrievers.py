"""Retriever adapters presenting a uniform search(text, k) surface."""

from __future__ import annotations

from dataclasses import dataclass

from .dense import EmbeddingCache, EmbeddingClient, EmbeddingProviderSpec, VectorStore, dense_search, embed
from .lexical import DEFAULT_B, DEFAULT_K1, InvertedIndex, bm25_search
from .runs import RunList

__all__ = ["BM25Retriever", "DenseRetriever"]


@dataclass
class BM25Retriever:
    index: InvertedIndex
    k1: float = DEFAULT_K1
    b: float = DEFAULT_B
    tag: str = "bm25"

    def search(self, text: str, k: int, query_id: str = "") -> RunList:
        return bm25_search(self.index, text, k, query_id=query_id,
                           k1=self.k1, b=self.b, tag=self.tag)


@dataclass
class DenseRetriever:
    store: VectorStore
    client: EmbeddingClient
    spec: EmbeddingProviderSpec
    cache: EmbeddingCache | None = None
    tag: str = "dense"

    def search(self, text: str, k: int, query_id: str = "") -> RunList:
        query_text = self.spec.query_prefix + text
        vector = embed([query_text], self.spec, self.client, self.cache)[0]
        return dense_search(self.store, vector, k, query_id=query_id, tag=self.tag)
