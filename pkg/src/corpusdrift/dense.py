"""Embedding-based retrieval: pluggable providers, on-disk cache, exact top-k.

Search is an exact full scan (similarity = dot product of unit vectors);
at pool-construction scale (tens of thousands of chunks) this is tractable
and keeps judgments reproducible, so no approximate index is used.
"""

from __future__ import annotations

import hashlib
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol, Sequence

import numpy as np

from .errors import ContractViolationError, DuplicateDocIdError, ProviderError
from .runs import RunList
from .snapshot.tokenizers import DEFAULT_TOKENIZER

__all__ = ["EmbeddingCache", "EmbeddingClient", "EmbeddingProviderSpec",
           "HashingStubEmbedder", "HttpEmbeddingClient", "OneHotStubEmbedder",
           "PROVIDER_REGISTRY", "VectorStore", "dense_search", "embed"]


@dataclass(frozen=True)
class EmbeddingProviderSpec:
    """Named embedding configuration: model identity plus calling conventions."""

    provider: str
    model: str
    dim: int
    max_input_tokens: int
    endpoint: str = ""
    api_key_env: str = ""
    query_prefix: str = ""
    passage_prefix: str = ""
    batch_size: int = 32

    def __post_init__(self) -> None:
        if self.dim <= 0:
            raise ContractViolationError("embedding dimensionality must be > 0")


# Named configurations for the dense retrievers used in pooling. Endpoint
# and credentials come from the pipeline config at run time.
PROVIDER_REGISTRY: dict[str, EmbeddingProviderSpec] = {
    "bge-gemma2": EmbeddingProviderSpec(
        provider="http", model="BAAI/bge-multilingual-gemma2",
        dim=3584, max_input_tokens=8192),
    "e5-mistral-7b": EmbeddingProviderSpec(
        provider="http", model="intfloat/e5-mistral-7b-instruct",
        dim=4096, max_input_tokens=4096),
    "qwen3-4b": EmbeddingProviderSpec(
        provider="http", model="Qwen/Qwen3-Embedding-4B",
        dim=4096, max_input_tokens=32768),
}


class EmbeddingClient(Protocol):
    def embed_batch(self, texts: Sequence[str]) -> list[list[float]]:
        ...


class HttpEmbeddingClient:
    """OpenAI-style /embeddings endpoint; API key read from the environment."""

    def __init__(self, spec: EmbeddingProviderSpec, timeout: float = 60.0,
                 limiter=None):
        if not spec.endpoint:
            raise ContractViolationError(f"provider {spec.provider}: endpoint not configured")
        self.spec = spec
        self.timeout = timeout
        self.limiter = limiter

    def embed_batch(self, texts: Sequence[str]) -> list[list[float]]:
        import os

        import requests

        if self.limiter:
            self.limiter.wait()
        headers = {"Content-Type": "application/json"}
        if self.spec.api_key_env:
            key = os.environ.get(self.spec.api_key_env, "")
            if not key:
                raise ProviderError(f"environment variable {self.spec.api_key_env} not set")
            headers["Authorization"] = f"Bearer {key}"
        resp = requests.post(
            self.spec.endpoint,
            json={"model": self.spec.model, "input": list(texts)},
            headers=headers, timeout=self.timeout)
        if resp.status_code != 200:
            raise ProviderError(
                f"embedding request failed ({resp.status_code}): {resp.text[:500]}")
        payload = resp.json()
        rows = sorted(payload["data"], key=lambda r: r["index"])
        return [row["embedding"] for row in rows]


class OneHotStubEmbedder:
    """Deterministic stand-in: a one-hot vector at hash(text) % dim.

    Identical texts map to identical vectors, distinct texts almost surely
    to orthogonal ones, which makes per-item round-trips checkable.
    """

    def __init__(self, dim: int):
        self.dim = dim

    def embed_batch(self, texts: Sequence[str]) -> list[list[float]]:
        out = []
        for text in texts:
            vec = [0.0] * self.dim
            digest = hashlib.sha256(text.encode("utf-8")).digest()
            vec[int.from_bytes(digest[:8], "big") % self.dim] = 1.0
            out.append(vec)
        return out


class HashingStubEmbedder:
    """Deterministic bag-of-tokens embedding for offline pipeline runs.

    Each lowercased alphanumeric token adds one-hot mass at its hash bucket;
    overlapping vocabulary then yields genuinely similar vectors.
    """

    def __init__(self, dim: int):
        self.dim = dim

    def embed_batch(self, texts: Sequence[str]) -> list[list[float]]:
        from .lexical import tokenize_lexical

        out = []
        for text in texts:
            vec = np.zeros(self.dim, dtype=np.float64)
            for token in tokenize_lexical(text):
                digest = hashlib.sha256(token.encode("utf-8")).digest()
                vec[int.from_bytes(digest[:8], "big") % self.dim] += 1.0
            out.append(vec.tolist())
        return out


def make_stub_client(spec: EmbeddingProviderSpec) -> EmbeddingClient:
    if spec.provider == "stub-onehot":
        return OneHotStubEmbedder(spec.dim)
    if spec.provider == "stub-hash":
        return HashingStubEmbedder(spec.dim)
    raise ContractViolationError(f"no stub client for provider {spec.provider!r}")


class EmbeddingCache:
    """Content-addressed on-disk cache keyed by (provider, model, text hash)."""

    def __init__(self, root: str | Path):
        self.root = Path(root)

    def key(self, spec: EmbeddingProviderSpec, text: str) -> str:
        payload = f"{spec.provider}\x00{spec.model}\x00{text}".encode("utf-8")
        return hashlib.sha256(payload).hexdigest()

    def _path(self, key: str) -> Path:
        return self.root / key[:2] / f"{key}.npy"

    def get(self, key: str) -> np.ndarray | None:
        path = self._path(key)
        if not path.exists():
            return None
        return np.load(path)

    def put(self, key: str, vector: np.ndarray) -> None:
        import os

        path = self._path(key)
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.parent / f".{key}.{os.getpid()}.tmp.npy"
        np.save(tmp, np.asarray(vector, dtype=np.float64))
        tmp.replace(path)


def truncate_to_budget(text: str, max_tokens: int) -> str:
    """Clip text to the provider's input budget (counting chunk tokens)."""
    pieces = DEFAULT_TOKENIZER.pieces(text)
    if len(pieces) <= max_tokens:
        return text
    return "".join(pieces[:max_tokens])


def embed(texts: Sequence[str], spec: EmbeddingProviderSpec,
          client: EmbeddingClient, cache: EmbeddingCache | None = None,
          max_retries: int = 3, workers: int = 1) -> list[np.ndarray]:
    """Embed texts order-preservingly, going through the cache when present.

    Texts are truncated to the provider budget before hashing, so the cache
    key reflects exactly what was sent.  Provider failures are retried with
    backoff up to max_retries, then raised as ProviderError.
    """
    for text in texts:
        if not text.strip():
            raise ValueError("cannot embed empty text")
    clipped = [truncate_to_budget(t, spec.max_input_tokens) for t in texts]
    keys = [cache.key(spec, t) if cache else "" for t in clipped]

    results: list[np.ndarray | None] = [None] * len(texts)
    misses: list[int] = []
    for i, key in enumerate(keys):
        hit = cache.get(key) if cache else None
        if hit is not None:
            results[i] = hit
        else:
            misses.append(i)

    batches = [misses[i:i + spec.batch_size] for i in range(0, len(misses), spec.batch_size)]

    def fetch(batch: list[int]) -> list[np.ndarray]:
        attempt = 0
        while True:
            try:
                vectors = client.embed_batch([clipped[i] for i in batch])
                break
            except ProviderError:
                attempt += 1
                if attempt >= max_retries:
                    raise
                time.sleep(min(2.0 ** attempt * 0.1, 5.0))
        if len(vectors) != len(batch):
            raise ContractViolationError(
                f"provider returned {len(vectors)} vectors for {len(batch)} inputs")
        out = []
        for vec in vectors:
            arr = np.asarray(vec, dtype=np.float64)
            if arr.shape != (spec.dim,):
                raise ContractViolationError(
                    f"provider returned shape {arr.shape}, expected ({spec.dim},)")
            out.append(arr)
        return out

    if workers > 1 and len(batches) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            fetched = list(pool.map(fetch, batches))
    else:
        fetched = [fetch(batch) for batch in batches]

    for batch, vectors in zip(batches, fetched):
        for i, vec in zip(batch, vectors):
            results[i] = vec
            if cache:
                cache.put(keys[i], vec)
    return results  # type: ignore[return-value]


@dataclass
class VectorStore:
    """doc_id -> unit-normalized embedding; immutable after build."""

    spec: EmbeddingProviderSpec
    doc_ids: list[str] = field(default_factory=list)
    matrix: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))

    @classmethod
    def build(cls, spec: EmbeddingProviderSpec, doc_ids: Sequence[str],
              vectors: Sequence[np.ndarray]) -> VectorStore:
        if len(doc_ids) != len(vectors):
            raise ContractViolationError("doc_ids and vectors length mismatch")
        if len(set(doc_ids)) != len(doc_ids):
            raise DuplicateDocIdError("duplicate doc_id in vector store")
        if not doc_ids:
            return cls(spec=spec, doc_ids=[], matrix=np.zeros((0, spec.dim)))
        matrix = np.vstack([np.asarray(v, dtype=np.float64) for v in vectors])
        if matrix.shape[1] != spec.dim:
            raise ContractViolationError(
                f"vector dimensionality {matrix.shape[1]} != spec dim {spec.dim}")
        norms = np.linalg.norm(matrix, axis=1, keepdims=True)
        if np.any(norms == 0):
            raise ContractViolationError("zero vector cannot be unit-normalized")
        return cls(spec=spec, doc_ids=list(doc_ids), matrix=matrix / norms)

    def save(self, path: str | Path) -> None:
        meta = json.dumps({
            "doc_ids": self.doc_ids,
            "spec": {
                "provider": self.spec.provider, "model": self.spec.model,
                "dim": self.spec.dim, "max_input_tokens": self.spec.max_input_tokens,
            },
        })
        np.savez_compressed(Path(path), matrix=self.matrix,
                            meta=np.frombuffer(meta.encode("utf-8"), dtype=np.uint8))

    @classmethod
    def load(cls, path: str | Path) -> VectorStore:
        with np.load(Path(path)) as data:
            meta = json.loads(bytes(data["meta"]).decode("utf-8"))
            spec = EmbeddingProviderSpec(
                provider=meta["spec"]["provider"], model=meta["spec"]["model"],
                dim=meta["spec"]["dim"],
                max_input_tokens=meta["spec"]["max_input_tokens"])
            return cls(spec=spec, doc_ids=meta["doc_ids"], matrix=data["matrix"])


def dense_search(store: VectorStore, query_vector: np.ndarray, k: int, *,
                 query_id: str = "", tag: str = "dense") -> RunList:
    """Exact top-k by cosine similarity over the whole store."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if not store.doc_ids:
        return RunList(query_id=query_id, tag=tag)
    q = np.asarray(query_vector, dtype=np.float64)
    if q.shape != (store.matrix.shape[1],):
        raise ContractViolationError(
            f"query dim {q.shape} does not match store dim {store.matrix.shape[1]}")
    norm = np.linalg.norm(q)
    if norm > 0:
        q = q / norm
    scores = store.matrix @ q
    ranked = sorted(zip(store.doc_ids, scores.tolist()), key=lambda e: (-e[1], e[0]))
    return RunList(query_id=query_id, entries=ranked[:k], tag=tag)
