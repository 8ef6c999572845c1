"""Judgment-pool construction: query formulation, normalization, fusion.

Per query and setting, every retriever runs over every formulated query
text; a retriever's results are merged across texts by per-document max,
min-max normalized to [0,1], summed across retrievers, and the fused top-k
of each setting is unioned into the pool with provenance.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable, Iterable, Protocol, Sequence

from .clients import GenerationClient
from .errors import ContractViolationError, ProviderError
from .runs import RunList

__all__ = ["Pool", "QueryRecord", "QuerySetting", "Retriever", "build_pool",
           "formulate", "fuse", "load_queries", "minmax_normalize",
           "read_pools", "write_pools"]


@dataclass
class QueryRecord:
    """A question, its accepted answer, and the nuggets derived from them."""

    query_id: str
    title: str
    body: str
    answer: str
    nuggets: list[str] = field(default_factory=list)


def load_queries(path: str | Path) -> list[QueryRecord]:
    queries = []
    seen = set()
    with Path(path).open("r", encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            rec = json.loads(line)
            qid = str(rec["query_id"])
            if qid in seen:
                raise ContractViolationError(f"duplicate query_id {qid}")
            seen.add(qid)
            queries.append(QueryRecord(
                query_id=qid, title=rec.get("title", ""), body=rec.get("body", ""),
                answer=rec.get("answer", ""), nuggets=list(rec.get("nuggets", []))))
    return queries


class QuerySetting(Enum):
    ANSWER = "answer"
    NUGGETS = "nuggets"
    SUBQUESTIONS = "subquestions"
    CLOSED_BOOK = "closed_book"


_SUBQUESTION_PROMPT = """\
Decompose the following question into at most {count} short, self-contained \
sub-questions that together cover what is being asked. Reply with one \
numbered sub-question per line and nothing else.

Question title: {title}
Question body: {body}
"""

_CLOSED_BOOK_PROMPT = """\
Answer the following question from your own knowledge, without citing any \
documents. Be concise and concrete.

Question title: {title}
Question body: {body}
"""


def _parse_numbered(text: str, limit: int) -> list[str]:
    items = []
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        line = line.lstrip("-* ")
        head, _, rest = line.partition(". ")
        if head.isdigit() and rest:
            line = rest
        items.append(line)
    return items[:limit]


def formulate(query: QueryRecord, setting: QuerySetting,
              generator: GenerationClient | None = None,
              max_subquestions: int = 5) -> list[str]:
    """Query texts for one setting; generator required only for the two
    generated settings."""
    if setting is QuerySetting.ANSWER:
        return [query.answer]
    if setting is QuerySetting.NUGGETS:
        return list(query.nuggets)
    if generator is None:
        raise ValueError(f"setting {setting.name} requires a generator client")
    if setting is QuerySetting.SUBQUESTIONS:
        raw = generator.complete(_SUBQUESTION_PROMPT.format(
            count=max_subquestions, title=query.title, body=query.body))
        return _parse_numbered(raw, max_subquestions)
    raw = generator.complete(_CLOSED_BOOK_PROMPT.format(
        title=query.title, body=query.body))
    return [raw.strip()]


def minmax_normalize(run: RunList) -> RunList:
    """Map scores to [0,1] by (s - min) / (max - min), order unchanged.

    A constant run (max == min, including single entries) carries no ranking
    information and normalizes to all zeros so it cannot bias the fusion.
    """
    if not run.entries:
        return RunList(run.query_id, [], run.tag)
    scores = [s for _, s in run.entries]
    lo, hi = min(scores), max(scores)
    if hi == lo:
        entries = [(doc_id, 0.0) for doc_id, _ in run.entries]
    else:
        span = hi - lo
        entries = [(doc_id, (s - lo) / span) for doc_id, s in run.entries]
    return RunList(run.query_id, entries, run.tag)


def fuse(runs: Sequence[RunList], k: int) -> RunList:
    """Sum per-document scores across runs (absent contributes 0), top-k."""
    query_ids = {run.query_id for run in runs}
    if len(query_ids) > 1:
        raise ContractViolationError(f"fuse over mixed query_ids: {sorted(query_ids)}")
    totals: dict[str, float] = {}
    for run in runs:
        for doc_id, score in run.entries:
            totals[doc_id] = totals.get(doc_id, 0.0) + score
    query_id = query_ids.pop() if query_ids else ""
    return RunList.from_scores(query_id, totals, tag="fusion", k=k)


class Retriever(Protocol):
    tag: str

    def search(self, text: str, k: int, query_id: str = "") -> RunList:
        ...


@dataclass
class Pool:
    """Judgment-pool candidates with (setting, model) provenance."""

    query_id: str
    candidates: dict[str, list[tuple[str, str]]] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.candidates)

    def doc_ids(self) -> list[str]:
        return sorted(self.candidates)


def build_pool(query: QueryRecord, retrievers: Sequence[Retriever],
               generator: GenerationClient | None = None,
               settings: Sequence[QuerySetting] = tuple(QuerySetting),
               depth: int = 50, retrieve_depth: int = 1000,
               max_subquestions: int = 5,
               on_warning: Callable[[str], None] | None = None,
               generation_log: list | None = None) -> Pool:
    """Union of per-setting fused top-`depth` results, with provenance.

    Within a setting, a retriever's runs over the setting's multiple query
    texts merge by per-document max score *before* normalization, so any
    single nugget or sub-question can surface its evidence. A setting whose
    formulation fails is skipped with a warning; the pool is still built
    from the remaining settings.
    """
    if not query.nuggets:
        raise ValueError(f"query {query.query_id}: pool building requires nuggets")
    pool = Pool(query_id=query.query_id)
    for setting in settings:
        try:
            texts = [t for t in formulate(query, setting, generator, max_subquestions)
                     if t.strip()]
        except ProviderError as exc:
            if on_warning:
                on_warning(f"query {query.query_id}: setting {setting.name} "
                           f"skipped: {exc}")
            continue
        if generation_log is not None:
            generation_log.append({"query_id": query.query_id,
                                   "setting": setting.value, "texts": texts})
        if not texts:
            if on_warning:
                on_warning(f"query {query.query_id}: setting {setting.name} "
                           "produced no query text")
            continue
        normalized: list[RunList] = []
        surfaced_by: dict[str, set[str]] = {}
        for retriever in retrievers:
            merged: dict[str, float] = {}
            for text in texts:
                run = retriever.search(text, retrieve_depth, query_id=query.query_id)
                for doc_id, score in run.entries:
                    if doc_id not in merged or score > merged[doc_id]:
                        merged[doc_id] = score
            run = RunList.from_scores(query.query_id, merged, tag=retriever.tag)
            for doc_id in merged:
                surfaced_by.setdefault(doc_id, set()).add(retriever.tag)
            normalized.append(minmax_normalize(run))
        fused = fuse(normalized, depth)
        for doc_id, _ in fused.entries:
            provenance = pool.candidates.setdefault(doc_id, [])
            for tag in sorted(surfaced_by.get(doc_id, ())):
                provenance.append((setting.value, tag))
    return pool


def write_pools(pools: Iterable[Pool], path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for pool in pools:
            for doc_id in pool.doc_ids():
                fh.write(json.dumps({
                    "query_id": pool.query_id,
                    "doc_id": doc_id,
                    "provenance": [list(p) for p in pool.candidates[doc_id]],
                }, sort_keys=True) + "\n")


def read_pools(path: str | Path) -> dict[str, Pool]:
    pools: dict[str, Pool] = {}
    with Path(path).open("r", encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            rec = json.loads(line)
            pool = pools.setdefault(rec["query_id"], Pool(query_id=rec["query_id"]))
            pool.candidates[rec["doc_id"]] = [tuple(p) for p in rec["provenance"]]
    return pools
