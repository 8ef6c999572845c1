"""Drift reports comparing two snapshots: grounding, sources, rank stability."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from .errors import ContractViolationError
from .fusion import QueryRecord
from .judging import SupportMatrix
from .metrics import MetricReport, kendall_tau
from .snapshot.documents import parse_doc_id

__all__ = ["CorrelationReport", "DistributionReport", "GroundingReport",
           "grounding_report", "query_shift", "ranking_correlation",
           "source_distribution"]


@dataclass
class GroundingReport:
    """Which nuggets (and hence queries) remain supported by the corpus."""

    snapshot: str
    per_query: dict[str, dict] = field(default_factory=dict)  # qid -> {total, supported}
    unjudged_queries: list[str] = field(default_factory=list)

    @property
    def total_nuggets(self) -> int:
        return sum(q["total"] for q in self.per_query.values())

    @property
    def supported_nuggets(self) -> int:
        return sum(q["supported"] for q in self.per_query.values())

    @property
    def fully_grounded_queries(self) -> int:
        return sum(1 for q in self.per_query.values() if q["supported"] == q["total"])

    def to_dict(self) -> dict:
        return {
            "snapshot": self.snapshot,
            "queries_evaluated": len(self.per_query),
            "fully_grounded_queries": self.fully_grounded_queries,
            "total_nuggets": self.total_nuggets,
            "supported_nuggets": self.supported_nuggets,
            "unjudged_queries": self.unjudged_queries,
            "per_query": self.per_query,
        }

    def table(self) -> str:
        lines = [
            f"Grounding report ({self.snapshot})",
            f"  queries fully grounded : {self.fully_grounded_queries}/{len(self.per_query)}",
            f"  nuggets supported      : {self.supported_nuggets}/{self.total_nuggets}",
        ]
        if self.unjudged_queries:
            lines.append(f"  unjudged queries       : {len(self.unjudged_queries)}")
        return "\n".join(lines) + "\n"


def grounding_report(qrels: Mapping[str, set[str]],
                     matrices: Mapping[str, SupportMatrix],
                     queries: Sequence[QueryRecord],
                     snapshot: str = "") -> GroundingReport:
    """A nugget is supported when at least one relevant document covers it;
    a query is fully grounded when all of its nuggets are supported."""
    report = GroundingReport(snapshot=snapshot)
    for query in queries:
        matrix = matrices.get(query.query_id)
        if matrix is None:
            report.unjudged_queries.append(query.query_id)
            continue
        supported = matrix.supported_nugget_indices()
        report.per_query[query.query_id] = {
            "total": len(matrix.nuggets),
            "supported": len(supported),
        }
    return report


@dataclass
class DistributionReport:
    """Supporting-document counts and percentages per repository."""

    snapshot: str
    counts: dict[str, int] = field(default_factory=dict)
    scope: str = "all queries"

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    def percentages(self) -> dict[str, float]:
        total = self.total
        if total == 0:
            return {repo: 0.0 for repo in self.counts}
        return {repo: 100.0 * n / total for repo, n in self.counts.items()}

    def to_dict(self) -> dict:
        return {"snapshot": self.snapshot, "scope": self.scope,
                "total_supporting": self.total, "counts": self.counts,
                "percentages": self.percentages()}

    def table(self) -> str:
        pct = self.percentages()
        repos = sorted(self.counts, key=lambda r: (-self.counts[r], r))
        width = max([len("Repository")] + [len(r) for r in repos], default=10)
        lines = [f"Source distribution ({self.snapshot}, {self.scope})",
                 f"{'Repository'.ljust(width)}  Supporting  (%)"]
        for repo in repos:
            lines.append(f"{repo.ljust(width)}  {self.counts[repo]:>10,}  ({pct[repo]:.1f}%)")
        lines.append(f"{'Total'.ljust(width)}  {self.total:>10,}")
        return "\n".join(lines) + "\n"


def source_distribution(qrels: Mapping[str, set[str]],
                        snapshot: str = "", scope: str = "all queries") -> DistributionReport:
    """Group relevant documents by the repository encoded in their doc_id."""
    report = DistributionReport(snapshot=snapshot, scope=scope)
    for query_id in sorted(qrels):
        for doc_id in qrels[query_id]:
            try:
                repo, _, _, _ = parse_doc_id(doc_id)
            except ValueError as exc:
                raise ContractViolationError(str(exc)) from exc
            report.counts[repo] = report.counts.get(repo, 0) + 1
    report.counts = dict(sorted(report.counts.items()))
    return report


def query_shift(qrels_a: Mapping[str, set[str]], qrels_b: Mapping[str, set[str]],
                label_a: str, label_b: str,
                query_id: str) -> tuple[DistributionReport, DistributionReport]:
    """Side-by-side per-query source distributions for a case study.

    A query relevant in only one snapshot yields an empty distribution on
    the other side rather than an error, so one-sided drift stays visible.
    """
    if query_id not in qrels_a and query_id not in qrels_b:
        raise KeyError(f"query {query_id} present in neither snapshot")
    side_a = source_distribution({query_id: qrels_a.get(query_id, set())},
                                 snapshot=label_a, scope=f"query {query_id}")
    side_b = source_distribution({query_id: qrels_b.get(query_id, set())},
                                 snapshot=label_b, scope=f"query {query_id}")
    return side_a, side_b


@dataclass
class CorrelationReport:
    """Per-metric Kendall tau between two snapshot leaderboards.

    A tau of None marks a metric where tau-b is undefined because one
    snapshot's leaderboard is entirely tied.
    """

    label_a: str
    label_b: str
    taus: dict[str, float | None] = field(default_factory=dict)
    leaderboards: dict[str, dict[str, list]] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"snapshot_a": self.label_a, "snapshot_b": self.label_b,
                "kendall_tau": self.taus, "leaderboards": self.leaderboards}

    def table(self) -> str:
        lines = [f"Model-ranking correlation ({self.label_a} vs {self.label_b})",
                 f"{'Metric'.ljust(20)}  Kendall tau"]
        for metric, tau in self.taus.items():
            shown = "undefined (all tied)" if tau is None else f"{tau:+.3f}"
            lines.append(f"{metric.ljust(20)}  {shown}")
        return "\n".join(lines) + "\n"


def _leaderboard(reports: Sequence[MetricReport], metric: str) -> list[tuple[str, float]]:
    """Models ordered by mean metric, best first; ties break alphabetically."""
    rows = [(report.model, report.mean(metric)) for report in reports]
    rows.sort(key=lambda r: (-r[1], r[0]))
    return rows


def ranking_correlation(reports_a: Sequence[MetricReport],
                        reports_b: Sequence[MetricReport]) -> CorrelationReport:
    models_a = {r.model for r in reports_a}
    models_b = {r.model for r in reports_b}
    if models_a != models_b:
        raise ContractViolationError(
            f"model sets differ between snapshots: {sorted(models_a ^ models_b)}")
    if not reports_a:
        raise ValueError("no metric reports to correlate")
    label_a = reports_a[0].snapshot
    label_b = reports_b[0].snapshot
    metrics = sorted(set(reports_a[0].metrics()) & set(reports_b[0].metrics()))
    out = CorrelationReport(label_a=label_a, label_b=label_b)
    for metric in metrics:
        board_a = _leaderboard(reports_a, metric)
        board_b = _leaderboard(reports_b, metric)
        scores_a = dict(board_a)
        scores_b = dict(board_b)
        models = sorted(models_a)
        try:
            out.taus[metric] = kendall_tau([scores_a[m] for m in models],
                                           [scores_b[m] for m in models])
        except ValueError:
            out.taus[metric] = None  # a side is entirely tied
        out.leaderboards[metric] = {
            label_a: [[m, s] for m, s in board_a],
            label_b: [[m, s] for m, s in board_b],
        }
    return out


def save_report(data: dict, text: str, stem: Path) -> None:
    """Write the machine-readable and human-readable forms side by side.

    Suffixes are appended (not substituted) so dotted stems like
    "grounding.2024-10" keep their label.
    """
    stem.parent.mkdir(parents=True, exist_ok=True)
    (stem.parent / (stem.name + ".json")).write_text(
        json.dumps(data, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    (stem.parent / (stem.name + ".txt")).write_text(text, encoding="utf-8")
