"""Pipeline configuration: one YAML/JSON file drives every stage."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .errors import ConfigError
from .metrics import EvalConfig
from .snapshot.manifest import SnapshotManifest, load_manifest

__all__ = ["PipelineConfig", "RetrieverConfig", "ClientConfig", "load_config"]


@dataclass
class RetrieverConfig:
    kind: str                  # "bm25" | "dense"
    tag: str
    k1: float = 0.9
    b: float = 0.4
    provider: str = ""         # dense: registry name, "http", or a stub provider
    model: str = ""
    dim: int = 0
    max_input_tokens: int = 8192
    endpoint: str = ""
    api_key_env: str = ""
    query_prefix: str = ""
    passage_prefix: str = ""
    batch_size: int = 32


@dataclass
class ClientConfig:
    kind: str = "stub"         # "stub" | "http"
    model: str = ""
    endpoint: str = ""
    api_key_env: str = ""
    token_budget: int = 24000  # judge prompts only


@dataclass
class ConcurrencyConfig:
    workers: int = 4
    max_retries: int = 3
    rate_limit_per_s: float = 0.0   # 0 disables rate limiting


@dataclass
class PoolConfig:
    depth: int = 50
    retrieve_depth: int = 1000
    max_subquestions: int = 5


@dataclass
class PipelineConfig:
    output_dir: Path
    queries: Path
    snapshots: list[SnapshotManifest]
    retrievers: list[RetrieverConfig]
    generator: ClientConfig = field(default_factory=ClientConfig)
    judge: ClientConfig = field(default_factory=ClientConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    pool: PoolConfig = field(default_factory=PoolConfig)
    concurrency: ConcurrencyConfig = field(default_factory=ConcurrencyConfig)
    eval_models: list[str] = field(default_factory=list)  # retriever tags; [] = all
    stub_clients: bool = False
    config_hash: str = ""
    work_dir: Path | None = None

    def worktree_dir(self) -> Path:
        return self.work_dir if self.work_dir else self.output_dir / ".work"

    def labels(self) -> list[str]:
        return [m.label for m in self.snapshots]

    def manifest(self, label: str) -> SnapshotManifest:
        for m in self.snapshots:
            if m.label == label:
                return m
        raise ConfigError(f"no snapshot labelled {label!r}; have {self.labels()}")

    def validate(self) -> None:
        labels = self.labels()
        if len(set(labels)) != len(labels):
            raise ConfigError(f"snapshot labels must be distinct: {labels}")
        if not self.snapshots:
            raise ConfigError("config needs at least one snapshot")
        if not self.queries.exists():
            raise ConfigError(f"queries file does not exist: {self.queries}")
        tags = [r.tag for r in self.retrievers]
        if len(set(tags)) != len(tags):
            raise ConfigError(f"retriever tags must be unique: {tags}")
        for r in self.retrievers:
            if r.kind not in ("bm25", "dense"):
                raise ConfigError(f"retriever {r.tag}: unknown kind {r.kind!r}")
        for tag in self.eval_models:
            if tag not in tags:
                raise ConfigError(f"eval model {tag!r} is not a configured retriever")
        for m in self.snapshots:
            m.validate()


def _dataclass_from(cls, data: dict, where: str):
    fields = {f for f in cls.__dataclass_fields__}
    unknown = set(data) - fields
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
    return cls(**data)


def load_config(path: str | Path, stub_clients: bool = False) -> PipelineConfig:
    """Load, validate and hash a pipeline config file.

    The config hash covers the raw file contents plus the stub override, so
    artifacts produced under different settings never share a hash.
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file does not exist: {path}")
    text = path.read_text(encoding="utf-8")
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"config root must be a mapping: {path}")

    base = path.parent

    def resolve(p: str) -> Path:
        candidate = Path(p)
        return candidate if candidate.is_absolute() else base / candidate

    try:
        snapshots = []
        for entry in data.get("snapshots", []):
            if isinstance(entry, str):
                manifest_path = resolve(entry)
                if not manifest_path.exists():
                    raise ConfigError(f"manifest does not exist: {manifest_path}")
                snapshots.append(load_manifest(manifest_path))
            else:
                snapshots.append(SnapshotManifest.from_dict(entry))
        retrievers = [_dataclass_from(RetrieverConfig, r, f"retrievers[{i}]")
                      for i, r in enumerate(data.get("retrievers", []))]
        config = PipelineConfig(
            output_dir=resolve(data.get("output_dir", "out")),
            queries=resolve(data["queries"]) if "queries" in data else base / "queries.jsonl",
            snapshots=snapshots,
            retrievers=retrievers,
            generator=_dataclass_from(ClientConfig, data.get("generator", {}), "generator"),
            judge=_dataclass_from(ClientConfig, data.get("judge", {}), "judge"),
            eval=EvalConfig(**data.get("eval", {})),
            pool=_dataclass_from(PoolConfig, data.get("pool", {}), "pool"),
            concurrency=_dataclass_from(ConcurrencyConfig, data.get("concurrency", {}),
                                        "concurrency"),
            eval_models=list(data.get("eval_models", [])),
            stub_clients=stub_clients,
        )
        if "work_dir" in data:
            config.work_dir = resolve(data["work_dir"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid config {path}: {exc}") from exc

    config.config_hash = hashlib.sha256(
        (text + f"\nstub_clients={stub_clients}").encode("utf-8")).hexdigest()[:16]
    config.validate()
    return config
