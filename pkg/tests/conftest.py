from __future__ import annotations

import os
import subprocess
from pathlib import Path

import pytest

from corpusdrift.snapshot.documents import DocumentChunk


def make_chunk(doc_id: str, text: str, token_count: int | None = None) -> DocumentChunk:
    """Minimal corpus document for retrieval/judging tests."""
    repo, rest = doc_id.split("/", 1)
    path, _, span = rest.rpartition(":")
    start, end = span.split("-")
    return DocumentChunk(
        doc_id=doc_id, repo=repo, path=path, byte_start=int(start),
        byte_end=int(end), token_count=token_count if token_count is not None
        else max(1, len(text.split())), text=text)


def doc(repo: str, name: str, text: str, start: int = 0) -> DocumentChunk:
    end = start + len(text.encode("utf-8"))
    return make_chunk(f"{repo}/{name}:{start}-{end}", text)


class GitRepoBuilder:
    """Local git repositories with controlled committer timestamps."""

    def __init__(self, root: Path):
        self.root = root

    def _git(self, repo: Path, *args: str, date: str | None = None) -> None:
        env = dict(os.environ)
        env.update({
            "GIT_AUTHOR_NAME": "fixture", "GIT_AUTHOR_EMAIL": "fixture@example.com",
            "GIT_COMMITTER_NAME": "fixture", "GIT_COMMITTER_EMAIL": "fixture@example.com",
        })
        if date:
            env["GIT_AUTHOR_DATE"] = date
            env["GIT_COMMITTER_DATE"] = date
        subprocess.run(["git", *args], cwd=repo, env=env, check=True,
                       capture_output=True)

    def create(self, name: str, commits: list[tuple[str, dict[str, str | bytes]]]) -> Path:
        """commits: [(iso_committer_date, {relpath: content}), ...]."""
        repo = self.root / name
        repo.mkdir(parents=True)
        self._git(repo, "init", "--quiet", "-b", "main")
        for i, (date, files) in enumerate(commits):
            for rel, content in files.items():
                target = repo / rel
                target.parent.mkdir(parents=True, exist_ok=True)
                if isinstance(content, bytes):
                    target.write_bytes(content)
                else:
                    target.write_text(content, encoding="utf-8")
            self._git(repo, "add", "-A")
            self._git(repo, "commit", "--quiet", "-m", f"commit {i}",
                      "--allow-empty", date=date)
        return repo

    def remove_files(self, name: str, date: str, paths: list[str]) -> None:
        repo = self.root / name
        for rel in paths:
            (repo / rel).unlink()
        self._git(repo, "add", "-A")
        self._git(repo, "commit", "--quiet", "-m", "remove files", date=date)

    def add_commit(self, name: str, date: str, files: dict[str, str]) -> None:
        repo = self.root / name
        for rel, content in files.items():
            target = repo / rel
            target.parent.mkdir(parents=True, exist_ok=True)
            target.write_text(content, encoding="utf-8")
        self._git(repo, "add", "-A")
        self._git(repo, "commit", "--quiet", "-m", "update", date=date)


@pytest.fixture
def git_builder(tmp_path: Path) -> GitRepoBuilder:
    return GitRepoBuilder(tmp_path / "repos")


def random_metric_instance(rng):
    """Random (run, matrix, k, alpha) tuple for metric oracle checks.

    Support density is rejection-sampled down to <=7 relevant docs so the
    exhaustive-ideal oracle (which enumerates orderings) stays tractable;
    the cap is independent of whether greedy and exhaustive ideals agree.
    """
    import numpy as np

    from corpusdrift.judging import SupportMatrix
    from corpusdrift.runs import RunList

    n_docs = rng.randint(1, 10)
    n_nuggets = rng.randint(1, 5)
    doc_ids = [f"d{i:02d}" for i in range(n_docs)]
    while True:
        density = rng.uniform(0.1, 0.5)
        cells = np.array([[rng.random() < density for _ in range(n_docs)]
                          for _ in range(n_nuggets)], dtype=bool)
        if int(cells.any(axis=0).sum()) <= 7:
            break
    matrix = SupportMatrix(
        query_id="q", nuggets=[f"n{i}" for i in range(n_nuggets)],
        doc_ids=doc_ids, cells=cells, judged=np.ones(n_docs, dtype=bool))

    ranked = doc_ids + [f"x{i}" for i in range(rng.randint(0, 3))]
    rng.shuffle(ranked)
    entries = [(doc, float(len(ranked) - i)) for i, doc in enumerate(ranked)]
    run = RunList(query_id="q", entries=entries, tag="rand")
    k = rng.randint(1, 12)
    return run, matrix, k


def pytest_runtest_logreport(report):
    # one visible pass/fail line per acceptance criterion
    if report.when == "call" and "test_acceptance" in report.nodeid:
        outcome = "PASS" if report.passed else ("SKIP" if report.skipped else "FAIL")
        name = report.nodeid.split("::")[-1]
        print(f"\n[acceptance] {outcome}: {name}")
