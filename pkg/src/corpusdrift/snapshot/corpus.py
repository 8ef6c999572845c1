"""Build a snapshot corpus: resolve, check out, enumerate, chunk, emit."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from ..errors import CorpusDriftError, DuplicateDocIdError
from . import gitrepo
from .chunker import chunk_file
from .files import enumerate_files
from .manifest import SnapshotManifest
from .tokenizers import get_tokenizer

__all__ = ["CorpusStats", "build_corpus"]


@dataclass
class CorpusStats:
    """Per-repository and total document counts for one snapshot."""

    label: str
    per_repo: dict[str, int] = field(default_factory=dict)

    @property
    def total(self) -> int:
        return sum(self.per_repo.values())

    def to_dict(self) -> dict:
        return {"label": self.label, "per_repo": self.per_repo, "total": self.total}

    def table(self) -> str:
        """Aligned text table: repository name and document count."""
        width = max([len("Repository")] + [len(r) for r in self.per_repo])
        lines = [f"{'Repository'.ljust(width)}  #Docs"]
        for repo, count in self.per_repo.items():
            lines.append(f"{repo.ljust(width)}  {count:,}")
        lines.append(f"{'Total'.ljust(width)}  {self.total:,}")
        return "\n".join(lines) + "\n"


def build_corpus(manifest: SnapshotManifest, workdir: str | Path,
                 out_dir: str | Path, log=None) -> CorpusStats:
    """Materialize one snapshot corpus.

    Writes `<label>.jsonl` (one DocumentChunk per line), `<label>.stats.json`,
    `<label>.stats.txt` and `<label>.manifest.json` (with resolved commits)
    under out_dir.  Unpinned repositories are resolved against the cutoff;
    already-pinned ones are checked out as-is, which is what makes stats
    reproducible run-to-run.
    """
    manifest.validate()
    workdir = Path(workdir)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    tokenizer = get_tokenizer(manifest.tokenizer)
    policy = manifest.file_policy()

    stats = CorpusStats(label=manifest.label)
    seen_ids: set[str] = set()
    corpus_path = out_dir / f"{manifest.label}.jsonl"

    with corpus_path.open("w", encoding="utf-8") as fh:
        for pin in manifest.repositories:
            try:
                repo_dir = gitrepo.clone(pin.url, workdir / pin.name)
                if not pin.resolved_commit:
                    pin.resolved_commit = gitrepo.resolve_commit(repo_dir, manifest.cutoff)
                gitrepo.checkout(repo_dir, pin.resolved_commit)
                count = 0
                for rel_path in enumerate_files(repo_dir, policy):
                    for chunk in chunk_file(repo_dir / rel_path, pin.name, rel_path,
                                            tokenizer, manifest.chunk_token_limit):
                        if chunk.doc_id in seen_ids:
                            raise DuplicateDocIdError(chunk.doc_id)
                        seen_ids.add(chunk.doc_id)
                        fh.write(chunk.to_json())
                        fh.write("\n")
                        count += 1
                stats.per_repo[pin.name] = count
                if log:
                    log(f"{manifest.label}: {pin.name}@{pin.resolved_commit[:12]} "
                        f"-> {count} documents")
            except CorpusDriftError as exc:
                raise type(exc)(f"repository {pin.name}: {exc}") from exc
            except OSError as exc:
                raise CorpusDriftError(f"repository {pin.name}: {exc}") from exc

    (out_dir / f"{manifest.label}.stats.json").write_text(
        json.dumps(stats.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    (out_dir / f"{manifest.label}.stats.txt").write_text(stats.table(), encoding="utf-8")
    manifest.save(out_dir / f"{manifest.label}.manifest.json")
    return stats
