#!/usr/bin/env python3
"""Benchmark the BM25 scoring kernels: compiled extension vs numpy fallback.

Builds a synthetic corpus with a Zipfian vocabulary, runs a batch of
queries through bm25_search once per backend, verifies both backends
return bit-identical runs, and reports throughput.

Usage:
    python benchmarks/bench_bm25.py [--docs 30000] [--queries 200]
"""

from __future__ import annotations

import argparse
import random
import time

import numpy as np

from corpusdrift import _kernels
from corpusdrift.lexical import build_index, bm25_search


class Doc:
    __slots__ = ("doc_id", "text")

    def __init__(self, doc_id: str, text: str):
        self.doc_id = doc_id
        self.text = text


def synthetic_corpus(n_docs: int, vocab_size: int = 5000,
                     seed: int = 7) -> tuple[list[Doc], list[str]]:
    rng = np.random.default_rng(seed)
    vocab = np.array([f"tok{i:05d}" for i in range(vocab_size)])
    # Zipf-ish term distribution, doc lengths 20..400 tokens
    weights = 1.0 / np.arange(1, vocab_size + 1)
    weights /= weights.sum()
    docs = []
    for i in range(n_docs):
        length = int(rng.integers(20, 400))
        terms = rng.choice(vocab, size=length, p=weights)
        docs.append(Doc(f"synth/doc{i:06d}.md:0-{length}", " ".join(terms)))
    qrng = random.Random(seed + 1)
    queries = [" ".join(qrng.choices(vocab[:400].tolist(), k=qrng.randint(2, 6)))
               for _ in range(1000)]
    return docs, queries


def run_backend(name: str, index, queries: list[str], k: int):
    _kernels.bm25_accumulate = _kernels.load_backend(name)  # patched for the run
    import corpusdrift.lexical as lexical
    lexical.bm25_accumulate = _kernels.load_backend(name)
    started = time.perf_counter()
    runs = [bm25_search(index, q, k=k, query_id=str(i))
            for i, q in enumerate(queries)]
    elapsed = time.perf_counter() - started
    return runs, elapsed


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--docs", type=int, default=30_000)
    parser.add_argument("--queries", type=int, default=200)
    parser.add_argument("--k", type=int, default=50)
    args = parser.parse_args()

    backends = _kernels.available_backends()
    print(f"available kernel backends: {backends}")
    if len(backends) < 2:
        print("compiled kernel not built; benchmarking the fallback only")

    print(f"building synthetic index: {args.docs} docs ...")
    docs, queries = synthetic_corpus(args.docs)
    queries = queries[:args.queries]
    index = build_index(docs)
    print(f"index: {index.num_docs} docs, {len(index.terms)} terms, "
          f"avg length {index.avg_doc_length:.1f}")

    results = {}
    timings = {}
    for name in backends:
        runs, elapsed = run_backend(name, index, queries, args.k)
        results[name] = runs
        timings[name] = elapsed
        print(f"{name:>8}: {elapsed:.3f}s total, "
              f"{len(queries) / elapsed:.1f} queries/s")

    if len(backends) == 2:
        a, b = backends
        identical = all(
            ra.entries == rb.entries for ra, rb in zip(results[a], results[b]))
        print(f"runs bit-identical across backends: {identical}")
        if not identical:
            raise SystemExit("backend mismatch: results differ")
        speedup = timings["python"] / timings["cython"]
        print(f"speedup (cython vs python): {speedup:.2f}x")


if __name__ == "__main__":
    main()
