"""Retrieval quality metrics: alpha-nDCG@k, Coverage@k, Recall@k, Kendall tau-b.

alpha-nDCG uses the standard greedy-constructed ideal over the judged pool.
Finding the true ideal ordering is intractable in general; greedy is the
conventional normalizer, which keeps scores comparable with other tooling.
All metrics depend on result order only, never on raw score values.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from .errors import ContractViolationError
from .judging import SupportMatrix
from .runs import RunList

__all__ = ["EvalConfig", "MetricReport", "alpha_ndcg", "coverage",
           "evaluate_runs", "kendall_tau", "recall"]


@dataclass(frozen=True)
class EvalConfig:
    alpha: float = 0.5
    ndcg_k: int = 10
    coverage_k: int = 20
    recall_k: int = 50

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must be in (0,1), got {self.alpha}")
        for name in ("ndcg_k", "coverage_k", "recall_k"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")


def _gain(nuggets: frozenset[int], seen: list[int], alpha: float) -> float:
    return sum((1.0 - alpha) ** seen[n] for n in nuggets)


def alpha_ndcg(run: RunList, matrix: SupportMatrix, k: int, alpha: float) -> float:
    """Diversity-aware nDCG: repeated coverage of a nugget is damped by
    (1 - alpha) per earlier-ranked supporting document.

    The denominator is the greedy ideal over the judged pool; 0.0 when no
    judged document supports any nugget.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    support = matrix.support_sets()
    n_nuggets = len(matrix.nuggets)

    seen = [0] * n_nuggets
    dcg = 0.0
    for rank, doc_id in enumerate(run.doc_ids()[:k], start=1):
        nuggets = support.get(doc_id)
        if not nuggets:
            continue
        dcg += _gain(nuggets, seen, alpha) / math.log2(rank + 1)
        for n in nuggets:
            seen[n] += 1

    seen = [0] * n_nuggets
    ideal = 0.0
    remaining = sorted(doc_id for doc_id, nuggets in support.items() if nuggets)
    for rank in range(1, min(k, len(remaining)) + 1):
        best_doc, best_gain = None, 0.0
        for doc_id in remaining:  # sorted, so ties resolve doc_id-ascending
            gain = _gain(support[doc_id], seen, alpha)
            if gain > best_gain:
                best_doc, best_gain = doc_id, gain
        if best_doc is None:
            break
        remaining.remove(best_doc)
        for n in support[best_doc]:
            seen[n] += 1
        ideal += best_gain / math.log2(rank + 1)

    if ideal == 0.0:
        return 0.0
    return dcg / ideal


def coverage(run: RunList, matrix: SupportMatrix, k: int) -> float:
    """Fraction of the query's nuggets supported by >=1 top-k document."""
    if not matrix.nuggets:
        raise ValueError(f"query {matrix.query_id} has no nuggets")
    support = matrix.support_sets()
    covered: set[int] = set()
    for doc_id in run.doc_ids()[:k]:
        covered |= support.get(doc_id, frozenset())
    return len(covered) / len(matrix.nuggets)


def recall(run: RunList, qrels: set[str] | Mapping[str, set[str]], k: int) -> float:
    """|top-k intersect relevant| / |relevant|."""
    relevant = qrels if isinstance(qrels, (set, frozenset)) else qrels.get(run.query_id, set())
    if not relevant:
        raise ValueError(
            f"query {run.query_id} has no relevant documents; skip it upstream")
    hits = sum(1 for doc_id in run.doc_ids()[:k] if doc_id in relevant)
    return hits / len(relevant)


def kendall_tau(ranking_a: Sequence, ranking_b: Sequence) -> float:
    """Kendall tau-b (tie-corrected) between two rankings of the same models.

    Accepts either aligned score tables (position i = model i in both) or
    two orderings of the same model names, which are converted to ranks.
    """
    if len(ranking_a) != len(ranking_b):
        raise ContractViolationError("rankings must cover the same models")
    n = len(ranking_a)
    if n < 2:
        raise ValueError("kendall tau undefined for fewer than 2 models")
    if all(isinstance(x, str) for x in ranking_a):
        if set(ranking_a) != set(ranking_b):
            raise ContractViolationError(
                f"model sets differ: {sorted(set(ranking_a) ^ set(ranking_b))}")
        pos_b = {model: i for i, model in enumerate(ranking_b)}
        a = list(range(n))
        b = [pos_b[model] for model in ranking_a]
    else:
        a, b = list(ranking_a), list(ranking_b)

    concordant = discordant = 0
    ties_a = ties_b = 0
    for i in range(n):
        for j in range(i + 1, n):
            da = (a[i] > a[j]) - (a[i] < a[j])
            db = (b[i] > b[j]) - (b[i] < b[j])
            if da == 0 and db == 0:
                ties_a += 1
                ties_b += 1
            elif da == 0:
                ties_a += 1
            elif db == 0:
                ties_b += 1
            elif da == db:
                concordant += 1
            else:
                discordant += 1
    n0 = n * (n - 1) // 2
    denom = math.sqrt((n0 - ties_a) * (n0 - ties_b))
    if denom == 0.0:
        raise ValueError("kendall tau-b undefined: a ranking is entirely tied")
    return (concordant - discordant) / denom


@dataclass
class MetricReport:
    """Per-query and mean metric values for one model on one snapshot."""

    model: str
    snapshot: str
    per_query: dict[str, dict[str, float]] = field(default_factory=dict)
    skipped: list[str] = field(default_factory=list)

    def mean(self, metric: str) -> float:
        values = [m[metric] for m in self.per_query.values() if metric in m]
        if not values:
            raise ValueError(f"no values for metric {metric!r}")
        return sum(values) / len(values)

    def metrics(self) -> list[str]:
        names: set[str] = set()
        for m in self.per_query.values():
            names |= m.keys()
        return sorted(names)

    def to_dict(self) -> dict:
        return {"model": self.model, "snapshot": self.snapshot,
                "per_query": self.per_query, "skipped": self.skipped,
                "means": {m: self.mean(m) for m in self.metrics()}}

    def save(self, path: str | Path) -> None:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n",
                              encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> MetricReport:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(model=data["model"], snapshot=data["snapshot"],
                   per_query=data["per_query"], skipped=data["skipped"])


def metric_labels(config: EvalConfig) -> tuple[str, str, str]:
    return (f"alpha_ndcg@{config.ndcg_k}", f"coverage@{config.coverage_k}",
            f"recall@{config.recall_k}")


def evaluate_runs(runs: Mapping[str, RunList], matrices: Mapping[str, SupportMatrix],
                  qrels: Mapping[str, set[str]], config: EvalConfig,
                  model: str, snapshot: str) -> MetricReport:
    """Evaluate one model's runs against matrices and qrels.

    Queries with no relevant documents (or no matrix) cannot be scored and
    are listed in `skipped`; means are over the evaluated queries only.
    """
    ndcg_label, cov_label, rec_label = metric_labels(config)
    report = MetricReport(model=model, snapshot=snapshot)
    for query_id in sorted(runs):
        matrix = matrices.get(query_id)
        relevant = qrels.get(query_id, set())
        if matrix is None or not relevant:
            report.skipped.append(query_id)
            continue
        run = runs[query_id]
        report.per_query[query_id] = {
            ndcg_label: alpha_ndcg(run, matrix, config.ndcg_k, config.alpha),
            cov_label: coverage(run, matrix, config.coverage_k),
            rec_label: recall(run, relevant, config.recall_k),
        }
    return report
