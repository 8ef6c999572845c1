from __future__ import annotations

import math
import random

import numpy as np
import pytest
from scipy.stats import kendalltau as scipy_kendalltau

from conftest import random_metric_instance
from corpusdrift.errors import ContractViolationError
from corpusdrift.judging import SupportMatrix
from corpusdrift.metrics import (EvalConfig, MetricReport, alpha_ndcg, coverage,
                                 evaluate_runs, kendall_tau, recall)
from corpusdrift.runs import RunList
from oracles import (brute_alpha_ndcg, brute_coverage, brute_kendall_tau_b,
                     brute_recall, exhaustive_ideal_dcg)


def matrix_from(support: dict[str, set[int]], nuggets: int,
                extra_docs: list[str] = ()) -> SupportMatrix:
    doc_ids = sorted(set(support) | set(extra_docs))
    cells = np.zeros((nuggets, len(doc_ids)), dtype=bool)
    for j, doc in enumerate(doc_ids):
        for n in support.get(doc, set()):
            cells[n, j] = True
    return SupportMatrix(query_id="q", nuggets=[f"n{i}" for i in range(nuggets)],
                         doc_ids=doc_ids, cells=cells,
                         judged=np.ones(len(doc_ids), dtype=bool))


def run_of(*doc_ids: str) -> RunList:
    entries = [(d, float(len(doc_ids) - i)) for i, d in enumerate(doc_ids)]
    return RunList(query_id="q", entries=entries, tag="t")


class TestAlphaNdcg:
    def test_perfect_run_scores_one(self):
        matrix = matrix_from({"d1": {0, 1}}, nuggets=2, extra_docs=["d2"])
        assert alpha_ndcg(run_of("d1", "d2"), matrix, k=10, alpha=0.5) == 1.0

    def test_no_supporting_docs_scores_zero(self):
        matrix = matrix_from({}, nuggets=2, extra_docs=["d1", "d2"])
        assert alpha_ndcg(run_of("d1", "d2"), matrix, k=10, alpha=0.5) == 0.0

    def test_worked_example(self):
        # d1 and d2 both cover the first nugget, d3 covers the second; the
        # run [d1, d2, d3] repeats nugget 0 at rank 2 while the ideal order
        # [d1, d3, d2] defers the repeat to rank 3.
        matrix = matrix_from({"d1": {0}, "d2": {0}, "d3": {1}}, nuggets=2)
        got = alpha_ndcg(run_of("d1", "d2", "d3"), matrix, k=3, alpha=0.5)
        dcg = 1.0 + 0.5 / math.log2(3) + 1.0 / math.log2(4)
        ideal = 1.0 + 1.0 / math.log2(3) + 0.5 / math.log2(4)
        assert got == pytest.approx(dcg / ideal, abs=1e-12)
        assert got == pytest.approx(0.9652, abs=1e-4)
        # exhaustive enumeration agrees with the greedy ideal here
        support = {"d1": {0}, "d2": {0}, "d3": {1}}
        assert exhaustive_ideal_dcg(support, 0.5, 3) == pytest.approx(ideal, abs=1e-12)

    def test_k_beyond_run_length_uses_available_prefix(self):
        matrix = matrix_from({"d1": {0}}, nuggets=1)
        assert alpha_ndcg(run_of("d1"), matrix, k=50, alpha=0.5) == 1.0

    def test_oracle_equivalence_on_random_instances(self):
        rng = random.Random(7)
        for _ in range(300):
            run, matrix, k = random_metric_instance(rng)
            support = {d: set(s) for d, s in matrix.support_sets().items()}
            expected = brute_alpha_ndcg(run.doc_ids(), support, 0.5, k)
            got = alpha_ndcg(run, matrix, k, 0.5)
            if abs(got - expected) > 1e-9:
                # greedy ideal below the exhaustive optimum: known corner
                assert got > expected
                continue
            assert got == pytest.approx(expected, abs=1e-9)

    def test_greedy_ideal_can_trail_exhaustive_optimum(self):
        # Three docs tie at initial gain 2 but only the pair (d4, d6) covers
        # four distinct nuggets; greedy cannot look ahead, so its ideal (and
        # hence the normalizer) is smaller than the exhaustive one.
        support = {"d1": {3}, "d3": {2, 4}, "d4": {1, 2},
                   "d5": {2}, "d6": {3, 4}, "d7": {0}}
        matrix = matrix_from(support, nuggets=5)
        run = run_of("d4", "d6")
        got = alpha_ndcg(run, matrix, k=2, alpha=0.3)
        expected = brute_alpha_ndcg(run.doc_ids(), support, 0.3, 2)
        assert got > expected  # greedy normalizer is smaller here
        assert got == pytest.approx(1.0617, abs=1e-4)

    def test_rank_only_dependence(self):
        rng = random.Random(11)
        for _ in range(50):
            run, matrix, k = random_metric_instance(rng)
            squashed = RunList(run.query_id,
                               [(d, math.tanh(s) + 5.0) for d, s in run.entries],
                               run.tag)
            assert alpha_ndcg(run, matrix, k, 0.5) == alpha_ndcg(squashed, matrix, k, 0.5)

    def test_values_in_unit_interval(self):
        rng = random.Random(13)
        for _ in range(200):
            run, matrix, k = random_metric_instance(rng)
            value = alpha_ndcg(run, matrix, k, 0.5)
            assert value >= 0.0
            if value > 1.0 + 1e-9:
                # only possible when the run beats the greedy ideal, i.e.
                # greedy trails the exhaustive optimum on this instance
                support = {d: set(s) for d, s in matrix.support_sets().items()}
                assert brute_alpha_ndcg(run.doc_ids(), support, 0.5, k) <= 1.0 + 1e-12


class TestCoverage:
    def test_two_of_three(self):
        matrix = matrix_from({"d1": {0}, "d2": {1}, "d3": {2}}, nuggets=3)
        assert coverage(run_of("d1", "d2"), matrix, k=2) == pytest.approx(2 / 3)

    def test_none_supported(self):
        matrix = matrix_from({"d9": {0}}, nuggets=3, extra_docs=["d1"])
        assert coverage(run_of("d1"), matrix, k=1) == 0.0

    def test_all_supported(self):
        matrix = matrix_from({"d1": {0, 1, 2}}, nuggets=3)
        assert coverage(run_of("d1"), matrix, k=1) == 1.0

    def test_matches_direct_set_computation(self):
        rng = random.Random(17)
        for _ in range(200):
            run, matrix, k = random_metric_instance(rng)
            support = {d: set(s) for d, s in matrix.support_sets().items()}
            expected = brute_coverage(run.doc_ids(), support, len(matrix.nuggets), k)
            assert coverage(run, matrix, k) == pytest.approx(expected, abs=1e-12)


class TestRecall:
    def test_three_of_four(self):
        relevant = {"d1", "d2", "d3", "d4"}
        assert recall(run_of("d1", "d2", "d3", "x"), relevant, k=4) == 0.75

    def test_all_retrieved(self):
        assert recall(run_of("d1", "d2"), {"d1", "d2"}, k=2) == 1.0

    def test_none_retrieved(self):
        assert recall(run_of("x1", "x2"), {"d1"}, k=2) == 0.0

    def test_no_relevant_docs_is_an_error(self):
        with pytest.raises(ValueError):
            recall(run_of("d1"), set(), k=1)

    def test_matches_direct_set_computation(self):
        rng = random.Random(19)
        for _ in range(200):
            run, matrix, k = random_metric_instance(rng)
            relevant = matrix.relevant_doc_ids()
            if not relevant:
                continue
            expected = brute_recall(run.doc_ids(), relevant, k)
            assert recall(run, relevant, k) == pytest.approx(expected, abs=1e-12)


class TestKendallTau:
    def test_identical_rankings(self):
        assert kendall_tau(["a", "b", "c"], ["a", "b", "c"]) == 1.0

    def test_reversed_rankings(self):
        assert kendall_tau(["a", "b", "c", "d"], ["d", "c", "b", "a"]) == -1.0

    def test_single_swap(self):
        assert kendall_tau([1, 2, 3, 4], [2, 1, 3, 4]) == pytest.approx(4 / 6)

    def test_too_few_models(self):
        with pytest.raises(ValueError):
            kendall_tau([1.0], [2.0])

    def test_model_set_mismatch(self):
        with pytest.raises(ContractViolationError):
            kendall_tau(["a", "b"], ["a", "c"])

    def test_symmetry_and_self_correlation(self):
        rng = random.Random(23)
        for _ in range(100):
            n = rng.randint(2, 8)
            x = [rng.random() for _ in range(n)]
            y = [rng.random() for _ in range(n)]
            assert kendall_tau(x, y) == pytest.approx(kendall_tau(y, x), abs=1e-15)
            assert kendall_tau(x, x) == pytest.approx(1.0)

    def test_matches_scipy_with_ties(self):
        rng = random.Random(29)
        for _ in range(200):
            n = rng.randint(2, 10)
            x = [float(rng.randint(0, 4)) for _ in range(n)]
            y = [float(rng.randint(0, 4)) for _ in range(n)]
            if len(set(x)) < 2 or len(set(y)) < 2:
                continue
            expected = scipy_kendalltau(x, y, variant="b").statistic
            assert kendall_tau(x, y) == pytest.approx(expected, abs=1e-12)
            assert kendall_tau(x, y) == pytest.approx(
                brute_kendall_tau_b(x, y), abs=1e-15)

    def test_exhaustive_permutations_up_to_five(self):
        import itertools
        for n in range(2, 6):
            base = list(range(n))
            for perm in itertools.permutations(base):
                expected = brute_kendall_tau_b([float(v) for v in base],
                                               [float(v) for v in perm])
                got = kendall_tau([float(v) for v in base], [float(v) for v in perm])
                assert got == pytest.approx(expected, abs=1e-12)
                assert -1.0 <= got <= 1.0


class TestEvalConfig:
    def test_alpha_bounds(self):
        with pytest.raises(ValueError):
            EvalConfig(alpha=0.0)
        with pytest.raises(ValueError):
            EvalConfig(alpha=1.0)

    def test_cutoff_bounds(self):
        with pytest.raises(ValueError):
            EvalConfig(ndcg_k=0)


class TestEvaluateRuns:
    def test_skips_queries_without_relevant_docs(self):
        matrix = matrix_from({"d1": {0}}, nuggets=1)
        empty = matrix_from({}, nuggets=1, extra_docs=["d9"])
        empty.query_id = "q2"
        runs = {"q": run_of("d1"), "q2": run_of("d9")}
        for run in runs.values():
            run.query_id = [k for k, v in runs.items() if v is run][0]
        report = evaluate_runs(
            runs, {"q": matrix, "q2": empty},
            {"q": {"d1"}, "q2": set()}, EvalConfig(), model="m", snapshot="s")
        assert list(report.per_query) == ["q"]
        assert report.skipped == ["q2"]
        assert report.mean("alpha_ndcg@10") == 1.0

    def test_report_round_trip(self, tmp_path):
        report = MetricReport(model="m", snapshot="s",
                              per_query={"q": {"recall@50": 0.5}}, skipped=["q2"])
        path = tmp_path / "m.json"
        report.save(path)
        loaded = MetricReport.load(path)
        assert loaded.model == "m"
        assert loaded.per_query == report.per_query
        assert loaded.skipped == ["q2"]


class TestMetricPreconditions:
    def test_alpha_ndcg_k_must_be_positive(self):
        matrix = matrix_from({"d1": {0}}, nuggets=1)
        with pytest.raises(ValueError):
            alpha_ndcg(run_of("d1"), matrix, k=0, alpha=0.5)

    def test_coverage_requires_nuggets(self):
        matrix = matrix_from({}, nuggets=0, extra_docs=["d1"])
        with pytest.raises(ValueError):
            coverage(run_of("d1"), matrix, k=1)
