from __future__ import annotations

import json

import numpy as np
import pytest

from conftest import doc
from corpusdrift.errors import JudgeParseError
from corpusdrift.fusion import QueryRecord
from corpusdrift.judging import (StubJudgeClient, SupportMatrix, build_judge_prompt,
                                 derive_qrels, judge_batch, judge_query,
                                 parse_judge_response, plan_batches,
                                 read_matrices, write_matrices)


def query_record() -> QueryRecord:
    return QueryRecord(query_id="q1", title="ImportError with loaders",
                       body="Cannot import UnstructuredURLLoader.",
                       answer="Install the unstructured package.",
                       nuggets=["install the unstructured package",
                                "import from document_loaders"])


class CannedJudge:
    model = "canned"

    def __init__(self, *responses: str):
        self.responses = list(responses)
        self.calls = 0

    def complete(self, prompt: str) -> str:
        response = self.responses[min(self.calls, len(self.responses) - 1)]
        self.calls += 1
        return response


class TestParseJudgeResponse:
    def test_well_formed(self):
        cells = parse_judge_response('{"1": ["D1"], "2": []}', ["D1", "D2"], 2)
        assert cells == [{"D1"}, set()]

    def test_unknown_label_rejected(self):
        with pytest.raises(JudgeParseError):
            parse_judge_response('{"1": ["D9"], "2": []}', ["D1", "D2"], 2)

    def test_missing_nugget_rejected(self):
        with pytest.raises(JudgeParseError):
            parse_judge_response('{"1": []}', ["D1"], 2)

    def test_extra_nugget_rejected(self):
        with pytest.raises(JudgeParseError):
            parse_judge_response('{"1": [], "2": [], "3": []}', ["D1"], 2)

    def test_all_empty_support(self):
        cells = parse_judge_response('{"1": [], "2": []}', ["D1"], 2)
        assert cells == [set(), set()]

    def test_code_fences_tolerated(self):
        raw = '```json\n{"1": ["D2"]}\n```'
        assert parse_judge_response(raw, ["D1", "D2"], 1) == [{"D2"}]

    def test_not_json_rejected(self):
        with pytest.raises(JudgeParseError):
            parse_judge_response("no json here", ["D1"], 1)


class TestJudgeBatch:
    def docs(self):
        return [doc("r", "a.md", "first text"), doc("r", "b.md", "second text"),
                doc("r", "c.md", "third text")]

    def test_supports_all(self):
        judge = CannedJudge('{"1": ["D1","D2","D3"], "2": ["D1","D2","D3"]}')
        result = judge_batch(query_record(), self.docs(), judge)
        assert result.judged
        assert result.support.all()

    def test_supports_none(self):
        judge = CannedJudge('{"1": [], "2": []}')
        result = judge_batch(query_record(), self.docs(), judge)
        assert result.judged
        assert not result.support.any()

    def test_fixed_mapping(self):
        judge = CannedJudge('{"1": ["D2"], "2": ["D1", "D3"]}')
        result = judge_batch(query_record(), self.docs(), judge)
        expected = np.array([[False, True, False], [True, False, True]])
        assert np.array_equal(result.support, expected)

    def test_malformed_then_valid_reprompts_once(self):
        judge = CannedJudge("garbage", '{"1": ["D1"], "2": []}')
        result = judge_batch(query_record(), self.docs(), judge)
        assert judge.calls == 2
        assert result.judged
        assert result.support[0, 0]
        assert len(result.raw_responses) == 2

    def test_twice_malformed_marks_batch_unjudged(self):
        judge = CannedJudge("garbage", "more garbage")
        result = judge_batch(query_record(), self.docs(), judge)
        assert judge.calls == 2
        assert not result.judged
        assert not result.support.any()  # never silently false-as-judged


class TestPlanBatches:
    def test_documents_never_split_and_budget_respected(self):
        docs = [doc("r", f"f{i}.md", "w " * 50) for i in range(10)]
        for d in docs:
            d.token_count = 100
        batches = plan_batches(docs, token_budget=1800, overhead_tokens=1500)
        assert sum(len(b) for b in batches) == 10
        assert all(sum(d.token_count for d in b) <= 300 for b in batches)

    def test_oversized_document_gets_own_batch(self):
        big = doc("r", "big.md", "w")
        big.token_count = 10_000
        small = doc("r", "small.md", "w")
        small.token_count = 10
        batches = plan_batches([small, big, small], token_budget=2000)
        assert [len(b) for b in batches] == [1, 1, 1]


class TestDeriveQrels:
    def matrix(self, cells, judged=None):
        cells = np.array(cells, dtype=bool)
        n_docs = cells.shape[1]
        return SupportMatrix(
            query_id="q1", nuggets=[f"n{i}" for i in range(cells.shape[0])],
            doc_ids=[f"d{j}" for j in range(n_docs)], cells=cells,
            judged=np.ones(n_docs, dtype=bool) if judged is None
            else np.array(judged, dtype=bool))

    def test_all_false_column_not_relevant(self):
        qrels = derive_qrels(self.matrix([[False], [False]]))
        assert qrels == {"q1": set()}

    def test_single_true_cell_is_relevant(self):
        qrels = derive_qrels(self.matrix([[False, True], [False, False]]))
        assert qrels == {"q1": {"d1"}}

    def test_unjudged_docs_excluded(self):
        matrix = self.matrix([[True, True]], judged=[True, False])
        assert derive_qrels(matrix) == {"q1": {"d0"}}
        assert matrix.unjudged_doc_ids() == {"d1"}

    def test_monotonicity_flipping_false_to_true(self):
        import random
        rng = random.Random(3)
        for _ in range(50):
            cells = [[rng.random() < 0.3 for _ in range(6)] for _ in range(3)]
            matrix = self.matrix(cells)
            before = matrix.relevant_doc_ids()
            i, j = rng.randrange(3), rng.randrange(6)
            matrix.cells[i, j] = True
            assert before <= matrix.relevant_doc_ids()

    def test_partition_relevant_nonrelevant_unjudged(self):
        matrix = self.matrix([[True, False, False]], judged=[True, True, False])
        relevant = matrix.relevant_doc_ids()
        unjudged = matrix.unjudged_doc_ids()
        non_relevant = set(matrix.doc_ids) - relevant - unjudged
        assert relevant == {"d0"}
        assert non_relevant == {"d1"}
        assert unjudged == {"d2"}
        assert relevant | non_relevant | unjudged == set(matrix.doc_ids)


class TestStubJudge:
    def test_substring_support_through_real_prompt(self):
        q = query_record()
        docs = [doc("r", "a.md", "You should install the Unstructured package."),
                doc("r", "b.md", "Unrelated content about vector stores."),
                doc("r", "c.md", "Then import from document_loaders as usual.")]
        matrix, audit = judge_query(q, docs, StubJudgeClient())
        assert matrix.judged.all()
        assert matrix.cells[0].tolist() == [True, False, False]
        assert matrix.cells[1].tolist() == [False, False, True]
        assert len(audit) >= 1
        # every cell reconstructible from the persisted raw responses
        for record in audit:
            for raw in record["responses"]:
                parsed = json.loads(raw)
                assert set(parsed) == {"1", "2"}

    def test_prompt_contains_context_and_labels(self):
        q = query_record()
        prompt = build_judge_prompt(q, [("D1", "text one"), ("D2", "text two")])
        assert "ImportError with loaders" in prompt
        assert "Install the unstructured package." in prompt
        assert "[D1] text one" in prompt and "[D2] text two" in prompt
        assert "1. install the unstructured package" in prompt


class TestMatrixIO:
    def test_round_trip_with_unjudged(self, tmp_path):
        cells = np.array([[True, False, False], [False, False, True]])
        matrix = SupportMatrix(query_id="q1", nuggets=["n1", "n2"],
                               doc_ids=["d0", "d1", "d2"], cells=cells,
                               judged=np.array([True, True, False]))
        # the unjudged doc's stale cell must not survive the round trip
        matrix.cells[1, 2] = True
        path = tmp_path / "matrix.jsonl"
        write_matrices([matrix], path)
        loaded = read_matrices(path)["q1"]
        assert loaded.nuggets == ["n1", "n2"]
        assert loaded.judged.tolist() == [True, True, False]
        assert loaded.cells[0].tolist() == [True, False, False]
        assert not loaded.cells[1, 2]  # unjudged stays unjudged
        assert loaded.unjudged_doc_ids() == {"d2"}


class TestJudgeQueryBatching:
    def docs(self, n=6, tokens=100):
        out = []
        for i in range(n):
            d = doc("r", f"f{i}.md", f"text body {i}")
            d.token_count = tokens
            out.append(d)
        return out

    def test_matrix_assembled_across_multiple_batches(self):
        # budget fits two docs per prompt -> three judge calls, one matrix
        import re

        calls = []

        class PerBatchJudge:
            model = "per-batch"

            def complete(self, prompt):
                labels = re.findall(r"\[(D\d+)\]", prompt)
                calls.append(labels)
                # support nugget 1 with the batch's first doc only
                return json.dumps({"1": [labels[0]], "2": []})

        q = query_record()
        matrix, audit = judge_query(q, self.docs(6), PerBatchJudge(),
                                    token_budget=1700)  # 1500 overhead + 200
        assert len(calls) == 3 and all(len(c) == 2 for c in calls)
        assert matrix.judged.all()
        # first doc of each batch supports nugget 0
        assert matrix.cells[0].tolist() == [True, False, True, False, True, False]
        assert not matrix.cells[1].any()
        assert len(audit) == 3

    def test_one_failing_batch_leaves_partition_consistent(self):
        class FlakyJudge:
            model = "flaky"

            def __init__(self):
                self.batch = 0

            def complete(self, prompt):
                self.batch += 1
                if self.batch in (2, 3):  # second batch: garbage, then garbage again
                    return "not json"
                return '{"1": ["D1", "D2"], "2": []}'

        q = query_record()
        matrix, _ = judge_query(q, self.docs(4), FlakyJudge(), token_budget=1700)
        relevant = matrix.relevant_doc_ids()
        unjudged = matrix.unjudged_doc_ids()
        non_relevant = set(matrix.doc_ids) - relevant - unjudged
        assert unjudged == {"r/f2.md:0-11", "r/f3.md:0-11"}
        assert relevant == {"r/f0.md:0-11", "r/f1.md:0-11"}
        assert relevant | non_relevant | unjudged == set(matrix.doc_ids)
        qrels = derive_qrels(matrix)
        assert qrels["q1"] == relevant
