"""Pipeline orchestration: snapshot, index, embed, pool, judge, evaluate, drift.

Every stage reads only persisted inputs and writes persisted outputs, so
any stage can be re-run independently.  A meta record per stage captures
the config hash, tool version and client model identifiers; no artifact
contains wall-clock data, so re-running a stage with unchanged inputs
reproduces identical bytes.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import __version__
from .clients import HttpGenerationClient, RateLimiter, StubGenerationClient
from .config import ClientConfig, PipelineConfig, RetrieverConfig, load_config
from .dense import (EmbeddingCache, EmbeddingProviderSpec, HttpEmbeddingClient,
                    PROVIDER_REGISTRY, VectorStore, embed, make_stub_client)
from .errors import ConfigError, CorpusDriftError, MissingPrerequisiteError
from .fusion import QuerySetting, build_pool, load_queries, read_pools, write_pools
from .judging import (JUDGE_PROMPT_VERSION, StubJudgeClient, derive_qrels,
                      judge_query, read_matrices, write_matrices)
from .lexical import InvertedIndex, build_index
from .metrics import MetricReport, evaluate_runs
from .report import (grounding_report, query_shift, ranking_correlation,
                     save_report, source_distribution)
from .retrievers import BM25Retriever, DenseRetriever
from .runs import RunList, read_qrels, write_qrels, write_runs
from .snapshot.corpus import build_corpus
from .snapshot.documents import read_corpus

# --- paths for persisted artifacts ---

def corpus_path(cfg: PipelineConfig, label: str) -> Path:
    return cfg.output_dir / "corpus" / f"{label}.jsonl"


def index_path(cfg: PipelineConfig, label: str) -> Path:
    return cfg.output_dir / "index" / f"{label}.bm25.npz"


def vectors_path(cfg: PipelineConfig, label: str, tag: str) -> Path:
    return cfg.output_dir / "vectors" / f"{label}.{tag}.npz"


def pools_path(cfg: PipelineConfig, label: str) -> Path:
    return cfg.output_dir / "pools" / f"{label}.jsonl"


def generated_path(cfg: PipelineConfig, label: str) -> Path:
    return cfg.output_dir / "pools" / f"{label}.generated.jsonl"


def matrix_path(cfg: PipelineConfig, label: str) -> Path:
    return cfg.output_dir / "judgments" / f"{label}.matrix.jsonl"


def qrels_path(cfg: PipelineConfig, label: str) -> Path:
    return cfg.output_dir / "judgments" / f"{label}.qrels.txt"


def responses_path(cfg: PipelineConfig, label: str) -> Path:
    return cfg.output_dir / "judgments" / f"{label}.responses.jsonl"


def run_path(cfg: PipelineConfig, label: str, tag: str) -> Path:
    return cfg.output_dir / "runs" / f"{label}.{tag}.trec"


def metrics_path(cfg: PipelineConfig, label: str, tag: str) -> Path:
    return cfg.output_dir / "metrics" / f"{label}.{tag}.json"


def _require(path: Path, stage: str, produced_by: str) -> Path:
    if not path.exists():
        raise MissingPrerequisiteError(
            f"stage '{stage}' needs {path}; run '{produced_by}' first",
            run_first=produced_by)
    return path


def _write_meta(cfg: PipelineConfig, stage: str, label: str, extra: dict) -> None:
    meta_dir = cfg.output_dir / "meta"
    meta_dir.mkdir(parents=True, exist_ok=True)
    record = {"stage": stage, "label": label, "config_hash": cfg.config_hash,
              "tool_version": __version__, **extra}
    (meta_dir / f"{stage}.{label}.json").write_text(
        json.dumps(record, indent=2, sort_keys=True) + "\n", encoding="utf-8")


# --- client/retriever assembly ---

def _limiter(cfg: PipelineConfig) -> RateLimiter | None:
    """One rate limiter per pipeline invocation, shared by every client."""
    if cfg.concurrency.rate_limit_per_s <= 0:
        return None
    shared = getattr(cfg, "_shared_limiter", None)
    if shared is None:
        shared = RateLimiter(cfg.concurrency.rate_limit_per_s)
        cfg._shared_limiter = shared  # runtime state, not configuration
    return shared


def _generation_client(cc: ClientConfig, cfg: PipelineConfig, role: str):
    if cfg.stub_clients or cc.kind == "stub":
        return StubJudgeClient() if role == "judge" else StubGenerationClient()
    if cc.kind == "http":
        if not cc.endpoint:
            raise ConfigError(f"{role} client: endpoint required for kind 'http'")
        return HttpGenerationClient(endpoint=cc.endpoint, model=cc.model,
                                    api_key_env=cc.api_key_env,
                                    max_retries=cfg.concurrency.max_retries,
                                    limiter=_limiter(cfg))
    raise ConfigError(f"{role} client: unknown kind {cc.kind!r}")


def _provider_spec(rc: RetrieverConfig, cfg: PipelineConfig) -> EmbeddingProviderSpec:
    if rc.provider in PROVIDER_REGISTRY and not cfg.stub_clients:
        registered = PROVIDER_REGISTRY[rc.provider]
        return EmbeddingProviderSpec(
            provider=registered.provider, model=registered.model,
            dim=registered.dim, max_input_tokens=registered.max_input_tokens,
            endpoint=rc.endpoint, api_key_env=rc.api_key_env,
            query_prefix=rc.query_prefix, passage_prefix=rc.passage_prefix,
            batch_size=rc.batch_size)
    provider = rc.provider
    if cfg.stub_clients and not provider.startswith("stub-"):
        provider = "stub-hash"
    dim = rc.dim or 256
    return EmbeddingProviderSpec(
        provider=provider, model=rc.model or provider, dim=dim,
        max_input_tokens=rc.max_input_tokens, endpoint=rc.endpoint,
        api_key_env=rc.api_key_env, query_prefix=rc.query_prefix,
        passage_prefix=rc.passage_prefix, batch_size=rc.batch_size)


def _embedding_client(spec: EmbeddingProviderSpec, cfg: PipelineConfig):
    if spec.provider.startswith("stub-"):
        return make_stub_client(spec)
    return HttpEmbeddingClient(spec, limiter=_limiter(cfg))


def _embedding_cache(cfg: PipelineConfig) -> EmbeddingCache:
    return EmbeddingCache(cfg.output_dir / "cache" / "embeddings")


def _dense_configs(cfg: PipelineConfig) -> list[RetrieverConfig]:
    return [r for r in cfg.retrievers if r.kind == "dense"]


def _build_retrievers(cfg: PipelineConfig, label: str, stage: str) -> list:
    retrievers = []
    cache = _embedding_cache(cfg)
    for rc in cfg.retrievers:
        if rc.kind == "bm25":
            path = _require(index_path(cfg, label), stage, "index")
            retrievers.append(BM25Retriever(index=InvertedIndex.load(path),
                                            k1=rc.k1, b=rc.b, tag=rc.tag))
        else:
            path = _require(vectors_path(cfg, label, rc.tag), stage, "embed")
            spec = _provider_spec(rc, cfg)
            retrievers.append(DenseRetriever(
                store=VectorStore.load(path), client=_embedding_client(spec, cfg),
                spec=spec, cache=cache, tag=rc.tag))
    return retrievers


# --- stages ---

def stage_snapshot(cfg: PipelineConfig, labels: list[str], echo) -> None:
    for label in labels:
        manifest = cfg.manifest(label)
        out_dir = cfg.output_dir / "corpus"
        stats = build_corpus(manifest, cfg.worktree_dir(), out_dir, log=echo)
        _write_meta(cfg, "snapshot", label, {
            "total_documents": stats.total,
            "commits": {r.name: r.resolved_commit for r in manifest.repositories}})
        echo(f"snapshot {label}: {stats.total} documents")


def stage_index(cfg: PipelineConfig, labels: list[str], echo) -> None:
    for label in labels:
        corpus = _require(corpus_path(cfg, label), "index", "snapshot")
        index = build_index(read_corpus(corpus))
        path = index_path(cfg, label)
        path.parent.mkdir(parents=True, exist_ok=True)
        index.save(path)
        _write_meta(cfg, "index", label, {
            "documents": index.num_docs, "terms": len(index.terms)})
        echo(f"index {label}: {index.num_docs} docs, {len(index.terms)} terms")


def stage_embed(cfg: PipelineConfig, labels: list[str], echo) -> None:
    dense = _dense_configs(cfg)
    if not dense:
        echo("embed: no dense retrievers configured; nothing to do")
        return
    cache = _embedding_cache(cfg)
    for label in labels:
        corpus = _require(corpus_path(cfg, label), "embed", "snapshot")
        chunks = list(read_corpus(corpus))
        for rc in dense:
            spec = _provider_spec(rc, cfg)
            client = _embedding_client(spec, cfg)
            texts = [spec.passage_prefix + c.text for c in chunks]
            ids = [c.doc_id for c in chunks]
            keep = [i for i, t in enumerate(texts) if t.strip()]
            vectors = embed([texts[i] for i in keep], spec, client, cache,
                            max_retries=cfg.concurrency.max_retries,
                            workers=cfg.concurrency.workers)
            store = VectorStore.build(spec, [ids[i] for i in keep], vectors)
            path = vectors_path(cfg, label, rc.tag)
            path.parent.mkdir(parents=True, exist_ok=True)
            store.save(path)
            _write_meta(cfg, "embed", f"{label}.{rc.tag}", {
                "model": spec.model, "provider": spec.provider,
                "documents": len(store.doc_ids)})
            echo(f"embed {label}/{rc.tag}: {len(store.doc_ids)} vectors")


def stage_pool(cfg: PipelineConfig, labels: list[str], echo) -> None:
    queries = load_queries(cfg.queries)
    generator = _generation_client(cfg.generator, cfg, "generator")
    for label in labels:
        retrievers = _build_retrievers(cfg, label, "pool")
        pools = []
        generation_log: list = []
        for query in queries:
            pools.append(build_pool(
                query, retrievers, generator=generator,
                settings=tuple(QuerySetting), depth=cfg.pool.depth,
                retrieve_depth=cfg.pool.retrieve_depth,
                max_subquestions=cfg.pool.max_subquestions,
                on_warning=lambda msg: echo(f"warning: {msg}"),
                generation_log=generation_log))
        write_pools(pools, pools_path(cfg, label))
        with generated_path(cfg, label).open("w", encoding="utf-8") as fh:
            for rec in generation_log:
                fh.write(json.dumps(rec, sort_keys=True) + "\n")
        _write_meta(cfg, "pool", label, {
            "generator_model": generator.model,
            "queries": len(queries),
            "pooled_documents": sum(len(p) for p in pools)})
        echo(f"pool {label}: {sum(len(p) for p in pools)} candidates "
             f"across {len(queries)} queries")


def stage_judge(cfg: PipelineConfig, labels: list[str], echo) -> None:
    queries = {q.query_id: q for q in load_queries(cfg.queries)}
    judge = _generation_client(cfg.judge, cfg, "judge")
    for label in labels:
        pools = read_pools(_require(pools_path(cfg, label), "judge", "pool"))
        corpus = _require(corpus_path(cfg, label), "judge", "snapshot")
        chunks = {c.doc_id: c for c in read_corpus(corpus)}
        matrices = []
        audit_records = []
        for query_id in sorted(pools):
            query = queries.get(query_id)
            if query is None:
                echo(f"warning: pooled query {query_id} missing from queries file")
                continue
            pooled_ids = pools[query_id].doc_ids()
            missing = [d for d in pooled_ids if d not in chunks]
            if missing:
                echo(f"warning: query {query_id}: {len(missing)} pooled "
                     f"documents not in the corpus; first: {missing[0]}")
            docs = [chunks[d] for d in pooled_ids if d in chunks]
            matrix, audit = judge_query(query, docs, judge,
                                        token_budget=cfg.judge.token_budget)
            matrices.append(matrix)
            audit_records.extend(audit)
        write_matrices(matrices, matrix_path(cfg, label))
        write_qrels(derive_qrels(matrices), qrels_path(cfg, label))
        with responses_path(cfg, label).open("w", encoding="utf-8") as fh:
            for rec in audit_records:
                fh.write(json.dumps(rec, sort_keys=True) + "\n")
        unjudged = sum(len(m.unjudged_doc_ids()) for m in matrices)
        _write_meta(cfg, "judge", label, {
            "judge_model": judge.model, "prompt_version": JUDGE_PROMPT_VERSION,
            "queries_judged": len(matrices), "unjudged_documents": unjudged})
        echo(f"judge {label}: {len(matrices)} queries judged, "
             f"{unjudged} documents left unjudged")


def stage_evaluate(cfg: PipelineConfig, labels: list[str], echo) -> None:
    queries = load_queries(cfg.queries)
    tags = cfg.eval_models or [r.tag for r in cfg.retrievers]
    depth = max(cfg.eval.ndcg_k, cfg.eval.coverage_k, cfg.eval.recall_k)
    for label in labels:
        matrices = read_matrices(_require(matrix_path(cfg, label), "evaluate", "judge"))
        qrels = read_qrels(_require(qrels_path(cfg, label), "evaluate", "judge"))
        retrievers = {r.tag: r for r in _build_retrievers(cfg, label, "evaluate")}
        summary_lines = []
        for tag in tags:
            retriever = retrievers[tag]
            runs: dict[str, RunList] = {}
            for query in queries:
                text = f"{query.title}\n{query.body}".strip()
                runs[query.query_id] = retriever.search(text, depth,
                                                        query_id=query.query_id)
            write_runs([runs[q.query_id] for q in queries], run_path(cfg, label, tag))
            report = evaluate_runs(runs, matrices, qrels, cfg.eval, tag, label)
            report.save(metrics_path(cfg, label, tag))
            means = " ".join(f"{m}={report.mean(m):.4f}" for m in report.metrics())
            summary_lines.append(f"{tag}: {means}")
            echo(f"evaluate {label}/{tag}: {means}")
        (cfg.output_dir / "metrics" / f"{label}.summary.txt").write_text(
            "\n".join(summary_lines) + "\n", encoding="utf-8")
        _write_meta(cfg, "evaluate", label, {"models": tags,
                                             "eval": vars(cfg.eval).copy()})


def stage_drift(cfg: PipelineConfig, query_id: str | None, echo) -> None:
    if len(cfg.snapshots) < 2:
        raise ConfigError("drift reports need two snapshots in the config")
    label_a, label_b = cfg.labels()[:2]
    queries = load_queries(cfg.queries)
    drift_dir = cfg.output_dir / "drift"

    data = {}
    for label in (label_a, label_b):
        matrices = read_matrices(_require(matrix_path(cfg, label), "drift", "judge"))
        qrels = read_qrels(_require(qrels_path(cfg, label), "drift", "judge"))
        data[label] = (matrices, qrels)
        grounding = grounding_report(qrels, matrices, queries, snapshot=label)
        save_report(grounding.to_dict(), grounding.table(),
                    drift_dir / f"grounding.{label}")
        echo(grounding.table().rstrip())

    distributions = {}
    for label in (label_a, label_b):
        dist = source_distribution(data[label][1], snapshot=label)
        distributions[label] = dist
        echo(dist.table().rstrip())
    save_report({label: d.to_dict() for label, d in distributions.items()},
                "".join(d.table() + "\n" for d in distributions.values()),
                drift_dir / "distribution")

    tags = cfg.eval_models or [r.tag for r in cfg.retrievers]
    reports_a = [MetricReport.load(_require(metrics_path(cfg, label_a, t), "drift",
                                            "evaluate")) for t in tags]
    reports_b = [MetricReport.load(_require(metrics_path(cfg, label_b, t), "drift",
                                            "evaluate")) for t in tags]
    if len(tags) >= 2:
        correlation = ranking_correlation(reports_a, reports_b)
        save_report(correlation.to_dict(), correlation.table(),
                    drift_dir / "correlation")
        echo(correlation.table().rstrip())
    else:
        echo("drift: fewer than two models evaluated; skipping rank correlation")

    if query_id:
        side_a, side_b = query_shift(data[label_a][1], data[label_b][1],
                                     label_a, label_b, query_id)
        save_report({label_a: side_a.to_dict(), label_b: side_b.to_dict()},
                    side_a.table() + "\n" + side_b.table(),
                    drift_dir / f"query-{query_id}")
        echo(f"case study written for query {query_id}")

    _write_meta(cfg, "drift", f"{label_a}-vs-{label_b}", {"models": tags})


# --- CLI wiring ---

@click.group()
@click.option("--config", "config_path", required=True,
              type=click.Path(), help="Pipeline config file (YAML or JSON).")
@click.option("--stub-clients", is_flag=True, default=False,
              help="Replace generator/judge/embedding providers with "
                   "deterministic offline stubs.")
@click.version_option(version=__version__)
@click.pass_context
def main(ctx: click.Context, config_path: str, stub_clients: bool) -> None:
    """Build time-pinned retrieval test collections and measure drift."""
    try:
        ctx.obj = load_config(config_path, stub_clients=stub_clients)
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        ctx.exit(2)


def _labels_option(fn):
    return click.option("--snapshot", "snapshot", default=None,
                        help="Restrict to one snapshot label.")(fn)


def _run_stage(cfg: PipelineConfig, fn, *args) -> None:
    try:
        fn(cfg, *args)
    except MissingPrerequisiteError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(2)
    except CorpusDriftError as exc:
        click.echo(f"stage failed: {exc}", err=True)
        sys.exit(1)


def _selected(cfg: PipelineConfig, snapshot: str | None) -> list[str]:
    if snapshot is None:
        return cfg.labels()
    if snapshot not in cfg.labels():
        click.echo(f"config error: unknown snapshot {snapshot!r}", err=True)
        sys.exit(2)
    return [snapshot]


def _stage_command(name: str, fn, help_text: str):
    @main.command(name=name, help=help_text)
    @_labels_option
    @click.pass_obj
    def command(cfg: PipelineConfig, snapshot: str | None) -> None:
        _run_stage(cfg, fn, _selected(cfg, snapshot), click.echo)

    return command


_stage_command("snapshot", stage_snapshot,
               "Resolve, check out and chunk each snapshot's repositories.")
_stage_command("index", stage_index,
               "Build the BM25 inverted index for each snapshot corpus.")
_stage_command("embed", stage_embed,
               "Embed corpus chunks into vector stores (cached).")
_stage_command("pool", stage_pool,
               "Build per-query judgment pools via multi-setting fusion.")
_stage_command("judge", stage_judge,
               "Judge nugget support for pooled documents; derive qrels.")
_stage_command("evaluate", stage_evaluate,
               "Run retrievers on the queries and score them against qrels.")


@main.command(name="drift")
@click.option("--query-id", default=None, help="Also emit a per-query case study.")
@click.pass_obj
def drift_command(cfg: PipelineConfig, query_id: str | None) -> None:
    """Compare the two configured snapshots and write drift reports."""
    _run_stage(cfg, stage_drift, query_id, click.echo)


if __name__ == "__main__":
    main()
