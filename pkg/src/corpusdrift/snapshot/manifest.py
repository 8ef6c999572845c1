"""Snapshot manifests: which repositories, pinned to which cutoff/commits."""

from __future__ import annotations

import datetime as dt
import json
import re
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from ..errors import ConfigError
from .files import DEFAULT_EXCLUDED_DIRS, DEFAULT_EXTENSIONS, FilePolicy
from .tokenizers import DEFAULT_TOKENIZER

__all__ = ["RepoPin", "SnapshotManifest", "load_manifest"]

_HEX40 = re.compile(r"^[0-9a-f]{40}$")


@dataclass
class RepoPin:
    name: str
    url: str
    resolved_commit: str = ""


@dataclass
class SnapshotManifest:
    label: str
    cutoff: dt.date
    repositories: list[RepoPin]
    tokenizer: str = DEFAULT_TOKENIZER.name
    chunk_token_limit: int = 2048
    include_ext: list[str] = field(default_factory=lambda: sorted(DEFAULT_EXTENSIONS))
    exclude_dirs: list[str] = field(default_factory=lambda: sorted(DEFAULT_EXCLUDED_DIRS))

    def validate(self) -> None:
        if not isinstance(self.cutoff, dt.date):
            raise ConfigError(f"manifest {self.label}: cutoff is not a date")
        names = [r.name for r in self.repositories]
        if len(set(names)) != len(names):
            raise ConfigError(f"manifest {self.label}: duplicate repository names")
        for repo in self.repositories:
            if "/" in repo.name or ":" in repo.name:
                raise ConfigError(
                    f"manifest {self.label}: repository name {repo.name!r} "
                    "may not contain '/' or ':'")
            if repo.resolved_commit and not _HEX40.match(repo.resolved_commit):
                raise ConfigError(
                    f"manifest {self.label}: {repo.name} pin is not a 40-hex hash")

    def file_policy(self) -> FilePolicy:
        return FilePolicy(include_ext=frozenset(self.include_ext),
                          exclude_dirs=frozenset(self.exclude_dirs))

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "cutoff": self.cutoff.isoformat(),
            "tokenizer": self.tokenizer,
            "chunk_token_limit": self.chunk_token_limit,
            "include_ext": list(self.include_ext),
            "exclude_dirs": list(self.exclude_dirs),
            "repositories": [
                {"name": r.name, "url": r.url, "resolved_commit": r.resolved_commit}
                for r in self.repositories
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> SnapshotManifest:
        try:
            cutoff = data["cutoff"]
            if isinstance(cutoff, str):
                cutoff = dt.date.fromisoformat(cutoff)
            manifest = cls(
                label=str(data["label"]),
                cutoff=cutoff,
                repositories=[
                    RepoPin(name=r["name"], url=r["url"],
                            resolved_commit=r.get("resolved_commit", "") or "")
                    for r in data["repositories"]
                ],
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"invalid manifest: {exc}") from exc
        if "tokenizer" in data:
            manifest.tokenizer = data["tokenizer"]
        if "chunk_token_limit" in data:
            manifest.chunk_token_limit = int(data["chunk_token_limit"])
        if "include_ext" in data:
            manifest.include_ext = sorted(data["include_ext"])
        if "exclude_dirs" in data:
            manifest.exclude_dirs = sorted(data["exclude_dirs"])
        manifest.validate()
        return manifest

    def save(self, path: str | Path) -> None:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(
            json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n",
            encoding="utf-8")


def load_manifest(path: str | Path) -> SnapshotManifest:
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if path.suffix in {".yaml", ".yml"}:
        data = yaml.safe_load(text)
    else:
        data = json.loads(text)
    return SnapshotManifest.from_dict(data)
