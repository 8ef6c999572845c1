"""Nugget-level support judging via an LLM judge client.

A document is relevant if and only if it supports at least one nugget.
Every judge call is persisted verbatim so each cell of the support matrix
can be reconstructed from the raw responses.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Protocol, Sequence

import numpy as np

from .errors import JudgeParseError
from .fusion import QueryRecord

__all__ = ["JUDGE_PROMPT_VERSION", "BatchJudgment", "StubJudgeClient",
           "SupportMatrix", "build_judge_prompt", "derive_qrels", "judge_batch",
           "judge_query", "parse_judge_response", "read_matrices", "write_matrices"]

JUDGE_PROMPT_VERSION = 1

_PROMPT_TEMPLATE = """\
You are assessing which documents support key facts (nuggets) needed to \
answer a technical question.

Question title: {title}
Question body: {body}
Reference answer: {answer}

Nuggets:
{nuggets}

Documents:
{documents}

For each nugget, list the labels of the documents that support the \
information in that nugget. Respond with a single JSON object mapping each \
nugget number (as a string) to an array of document labels, for example \
{{"1": ["D2"], "2": []}}. Use only the labels shown above and include every \
nugget number exactly once.
"""

_FORMAT_REMINDER = (
    "\nYour previous reply could not be parsed. Reply with ONLY the JSON "
    "object described above: every nugget number as a string key, each value "
    "an array of document labels such as \"D1\".")


class GenerationClient(Protocol):
    model: str

    def complete(self, prompt: str) -> str:
        ...


def build_judge_prompt(query: QueryRecord, labeled_docs: Sequence[tuple[str, str]]) -> str:
    nuggets = "\n".join(f"{i}. {n}" for i, n in enumerate(query.nuggets, start=1))
    documents = "\n".join(f"[{label}] {text}" for label, text in labeled_docs)
    return _PROMPT_TEMPLATE.format(
        title=query.title, body=query.body, answer=query.answer,
        nuggets=nuggets, documents=documents)


_FENCE = re.compile(r"^```(?:json)?\s*|\s*```$", re.MULTILINE)


def parse_judge_response(raw: str, expected_labels: Sequence[str],
                         nugget_count: int) -> list[set[str]]:
    """Strict parse: per-nugget lists of supporting document labels.

    Unknown labels and missing or extra nugget keys are rejected so a
    drifting judge can never silently corrupt the matrix.
    """
    text = _FENCE.sub("", raw.strip())
    start, end = text.find("{"), text.rfind("}")
    if start < 0 or end < start:
        raise JudgeParseError("no JSON object in response")
    try:
        data = json.loads(text[start:end + 1])
    except json.JSONDecodeError as exc:
        raise JudgeParseError(f"invalid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise JudgeParseError("response is not a JSON object")
    expected_keys = {str(i) for i in range(1, nugget_count + 1)}
    if set(data) != expected_keys:
        raise JudgeParseError(
            f"nugget keys {sorted(data)} != expected {sorted(expected_keys)}")
    valid = set(expected_labels)
    out: list[set[str]] = []
    for i in range(1, nugget_count + 1):
        labels = data[str(i)]
        if not isinstance(labels, list) or not all(isinstance(x, str) for x in labels):
            raise JudgeParseError(f"nugget {i}: supports must be a list of labels")
        unknown = set(labels) - valid
        if unknown:
            raise JudgeParseError(f"nugget {i}: unknown labels {sorted(unknown)}")
        out.append(set(labels))
    return out


@dataclass
class SupportMatrix:
    """Per-query (nugget x pooled document) boolean support cells."""

    query_id: str
    nuggets: list[str]
    doc_ids: list[str]
    cells: np.ndarray           # bool [n_nuggets, n_docs]
    judged: np.ndarray          # bool [n_docs]; False means never assessed

    @classmethod
    def empty(cls, query_id: str, nuggets: Sequence[str],
              doc_ids: Sequence[str]) -> SupportMatrix:
        return cls(query_id=query_id, nuggets=list(nuggets), doc_ids=list(doc_ids),
                   cells=np.zeros((len(nuggets), len(doc_ids)), dtype=bool),
                   judged=np.zeros(len(doc_ids), dtype=bool))

    def support_sets(self) -> dict[str, frozenset[int]]:
        """doc_id -> indices of supported nuggets, judged documents only."""
        out = {}
        for j, doc_id in enumerate(self.doc_ids):
            if self.judged[j]:
                out[doc_id] = frozenset(np.flatnonzero(self.cells[:, j]).tolist())
        return out

    def relevant_doc_ids(self) -> set[str]:
        cols = np.flatnonzero(self.cells.any(axis=0) & self.judged)
        return {self.doc_ids[j] for j in cols}

    def unjudged_doc_ids(self) -> set[str]:
        return {self.doc_ids[j] for j in np.flatnonzero(~self.judged)}

    def supported_nugget_indices(self) -> set[int]:
        judged_cells = self.cells[:, self.judged] if self.judged.any() else self.cells[:, :0]
        return set(np.flatnonzero(judged_cells.any(axis=1)).tolist())


def derive_qrels(matrices: SupportMatrix | Iterable[SupportMatrix]) -> dict[str, set[str]]:
    """Binary relevance: a document is relevant iff it supports >=1 nugget.

    Unjudged documents are excluded (they are reported separately, never
    silently treated as non-relevant judgments).
    """
    if isinstance(matrices, SupportMatrix):
        matrices = [matrices]
    return {m.query_id: m.relevant_doc_ids() for m in matrices}


@dataclass
class BatchJudgment:
    doc_ids: list[str]
    labels: list[str]
    support: np.ndarray        # bool [n_nuggets, len(doc_ids)]
    judged: bool
    raw_responses: list[str] = field(default_factory=list)


def judge_batch(query: QueryRecord, docs: Sequence, judge: GenerationClient) -> BatchJudgment:
    """Assess one batch of documents against all of the query's nuggets.

    Malformed output triggers one reprompt with a format reminder; if that
    also fails to parse, the whole batch is marked unjudged.
    """
    if not query.nuggets:
        raise ValueError(f"query {query.query_id} has no nuggets")
    labels = [f"D{i}" for i in range(1, len(docs) + 1)]
    labeled = [(label, doc.text) for label, doc in zip(labels, docs)]
    prompt = build_judge_prompt(query, labeled)

    result = BatchJudgment(
        doc_ids=[doc.doc_id for doc in docs], labels=labels,
        support=np.zeros((len(query.nuggets), len(docs)), dtype=bool),
        judged=False)
    attempt_prompt = prompt
    for _ in range(2):
        raw = judge.complete(attempt_prompt)
        result.raw_responses.append(raw)
        try:
            per_nugget = parse_judge_response(raw, labels, len(query.nuggets))
        except JudgeParseError:
            attempt_prompt = prompt + _FORMAT_REMINDER
            continue
        label_pos = {label: j for j, label in enumerate(labels)}
        for i, supporting in enumerate(per_nugget):
            for label in supporting:
                result.support[i, label_pos[label]] = True
        result.judged = True
        break
    return result


def plan_batches(docs: Sequence, token_budget: int, overhead_tokens: int = 1500) -> list[list]:
    """Group documents so each judge prompt stays within the token budget.

    A document is never split; one oversized document becomes its own batch.
    """
    budget = max(1, token_budget - overhead_tokens)
    batches: list[list] = []
    current: list = []
    used = 0
    for doc in docs:
        cost = max(1, doc.token_count)
        if current and used + cost > budget:
            batches.append(current)
            current, used = [], 0
        current.append(doc)
        used += cost
    if current:
        batches.append(current)
    return batches


def judge_query(query: QueryRecord, docs: Sequence, judge: GenerationClient,
                token_budget: int = 24000) -> tuple[SupportMatrix, list[dict]]:
    """Judge a query's pooled documents; returns the matrix and an audit log."""
    matrix = SupportMatrix.empty(query.query_id, query.nuggets,
                                 [d.doc_id for d in docs])
    col = {doc_id: j for j, doc_id in enumerate(matrix.doc_ids)}
    audit: list[dict] = []
    for batch in plan_batches(docs, token_budget):
        judgment = judge_batch(query, batch, judge)
        audit.append({
            "query_id": query.query_id,
            "doc_ids": judgment.doc_ids,
            "judged": judgment.judged,
            "responses": judgment.raw_responses,
        })
        if not judgment.judged:
            continue
        for b, doc_id in enumerate(judgment.doc_ids):
            j = col[doc_id]
            matrix.judged[j] = True
            matrix.cells[:, j] = judgment.support[:, b]
    return matrix, audit


class StubJudgeClient:
    """Deterministic offline judge: a nugget is supported by a document iff
    the nugget's normalized text occurs in the document's text.

    Understands the prompt template above and answers in the expected JSON
    schema, so the real parsing path is exercised.
    """

    model = "stub-judge"

    @staticmethod
    def _normalize(text: str) -> str:
        return " ".join(text.lower().split())

    def complete(self, prompt: str) -> str:
        nugget_block = prompt.split("Nuggets:\n", 1)[1].split("\n\nDocuments:\n", 1)[0]
        doc_block = prompt.split("\n\nDocuments:\n", 1)[1].rsplit("\n\nFor each nugget", 1)[0]
        nuggets = [line.split(". ", 1)[1] for line in nugget_block.splitlines() if line]
        docs: list[tuple[str, str]] = []
        for piece in re.split(r"\n(?=\[D\d+\] )", doc_block):
            m = re.match(r"\[(D\d+)\] (.*)", piece, re.DOTALL)
            if m:
                docs.append((m.group(1), m.group(2)))
        answer = {}
        for i, nugget in enumerate(nuggets, start=1):
            needle = self._normalize(nugget)
            answer[str(i)] = [label for label, text in docs
                              if needle in self._normalize(text)]
        return json.dumps(answer)


def write_matrices(matrices: Iterable[SupportMatrix], path: str | Path) -> None:
    """Persist matrices as JSONL cells: {query_id, nugget_index, doc_id, supported}.

    Unjudged documents are written with supported=null so the partition
    relevant / non-relevant / unjudged survives the round trip.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for m in matrices:
            header = {"query_id": m.query_id, "nuggets": m.nuggets,
                      "doc_ids": m.doc_ids}
            fh.write(json.dumps({"matrix": header}, sort_keys=True) + "\n")
            for i in range(len(m.nuggets)):
                for j, doc_id in enumerate(m.doc_ids):
                    supported = bool(m.cells[i, j]) if m.judged[j] else None
                    fh.write(json.dumps({
                        "query_id": m.query_id, "nugget_index": i,
                        "doc_id": doc_id, "supported": supported,
                    }, sort_keys=True) + "\n")


def read_matrices(path: str | Path) -> dict[str, SupportMatrix]:
    matrices: dict[str, SupportMatrix] = {}
    columns: dict[str, dict[str, int]] = {}
    with Path(path).open("r", encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            rec = json.loads(line)
            if "matrix" in rec:
                h = rec["matrix"]
                matrix = SupportMatrix.empty(h["query_id"], h["nuggets"], h["doc_ids"])
                matrices[h["query_id"]] = matrix
                columns[h["query_id"]] = {d: j for j, d in enumerate(matrix.doc_ids)}
                continue
            if rec["supported"] is None:
                continue
            m = matrices[rec["query_id"]]
            j = columns[rec["query_id"]][rec["doc_id"]]
            m.judged[j] = True
            if rec["supported"]:
                m.cells[rec["nugget_index"], j] = True
    return matrices
