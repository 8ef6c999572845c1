"""Ranked result lists and TREC-format run/qrels files."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .errors import ContractViolationError

__all__ = [
    "RunList",
    "read_qrels",
    "read_runs",
    "write_qrels",
    "write_runs",
]


@dataclass
class RunList:
    """Ranked (doc_id, score) results for one query from one configuration.

    Entries are kept sorted by score descending with ties broken by doc_id
    ascending, and doc_ids are unique, so runs serialize identically across
    runs and platforms.
    """

    query_id: str
    entries: list[tuple[str, float]] = field(default_factory=list)
    tag: str = ""

    @classmethod
    def from_scores(cls, query_id: str, scored: dict[str, float] | list[tuple[str, float]],
                    tag: str = "", k: int | None = None) -> RunList:
        """Build a run from unordered scores, enforcing the sort invariant."""
        pairs = list(scored.items()) if isinstance(scored, dict) else list(scored)
        seen = set()
        for doc_id, _ in pairs:
            if doc_id in seen:
                raise ContractViolationError(f"duplicate doc_id in run: {doc_id}")
            seen.add(doc_id)
        pairs.sort(key=lambda e: (-e[1], e[0]))
        if k is not None:
            pairs = pairs[:k]
        return cls(query_id=query_id, entries=pairs, tag=tag)

    def __len__(self) -> int:
        return len(self.entries)

    def doc_ids(self) -> list[str]:
        return [doc_id for doc_id, _ in self.entries]

    def truncated(self, k: int) -> RunList:
        return RunList(self.query_id, self.entries[:k], self.tag)

    def check_invariants(self) -> None:
        ids = self.doc_ids()
        if len(set(ids)) != len(ids):
            raise ContractViolationError(f"run {self.query_id} has duplicate doc_ids")
        for (d1, s1), (d2, s2) in zip(self.entries, self.entries[1:]):
            if s1 < s2 or (s1 == s2 and d1 >= d2):
                raise ContractViolationError(
                    f"run {self.query_id} not sorted at ({d1!r}, {d2!r})")


def write_runs(runs: list[RunList], path: str | Path) -> None:
    """Write runs in TREC format: `query_id Q0 doc_id rank score tag`."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for run in runs:
            for rank, (doc_id, score) in enumerate(run.entries, start=1):
                fh.write(f"{run.query_id} Q0 {doc_id} {rank} {score:.6f} {run.tag}\n")


def read_runs(path: str | Path) -> dict[str, RunList]:
    """Read a TREC run file into per-query RunLists (file order preserved).

    External runs are accepted as long as doc_ids are unique and scores are
    non-increasing per query; their tie order is respected as written, not
    forced into this package's doc_id-ascending convention.
    """
    out: dict[str, RunList] = {}
    with Path(path).open("r", encoding="utf-8") as fh:
        for line in fh:
            fields = line.split()
            if not fields:
                continue
            if len(fields) != 6:
                raise ContractViolationError(
                    f"{path}: expected 6 TREC fields, got {len(fields)}: {line!r}")
            qid, _, doc_id, _, score, tag = fields
            run = out.setdefault(qid, RunList(query_id=qid, tag=tag))
            run.entries.append((doc_id, float(score)))
    for run in out.values():
        ids = run.doc_ids()
        if len(set(ids)) != len(ids):
            raise ContractViolationError(f"run {run.query_id} has duplicate doc_ids")
        for (_, s1), (_, s2) in zip(run.entries, run.entries[1:]):
            if s1 < s2:
                raise ContractViolationError(
                    f"run {run.query_id} scores increase down the ranking")
    return out


def write_qrels(qrels: dict[str, set[str]], path: str | Path) -> None:
    """Write binary qrels in TREC format: `query_id 0 doc_id 1`."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for qid in sorted(qrels):
            for doc_id in sorted(qrels[qid]):
                fh.write(f"{qid} 0 {doc_id} 1\n")


def read_qrels(path: str | Path) -> dict[str, set[str]]:
    out: dict[str, set[str]] = {}
    with Path(path).open("r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            qid, _, doc_id, rel = line.split()
            if int(rel) > 0:
                out.setdefault(qid, set()).add(doc_id)
    return out
