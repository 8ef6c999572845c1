"""corpusdrift: retrieval test collections from time-pinned repository
snapshots, and measurement of temporal drift between them.

Modules
-------
snapshot    commit resolution, file enumeration, chunking, corpus builds
lexical     BM25 inverted-index retrieval (compiled kernel + fallback)
dense       embedding providers, on-disk cache, exact vector search
fusion      query formulation, min-max fusion, judgment pools
judging     nugget-support judging and binary qrels
metrics     alpha-nDCG@k, Coverage@k, Recall@k, Kendall tau-b
report      grounding / source-distribution / rank-correlation reports
cli         pipeline orchestration (`corpusdrift` console script)
"""

__version__ = "0.1.0"

from .dense import EmbeddingProviderSpec, VectorStore, dense_search, embed
from .fusion import Pool, QueryRecord, QuerySetting, build_pool, fuse, minmax_normalize
from .judging import SupportMatrix, derive_qrels, judge_query
from .lexical import InvertedIndex, bm25_search, build_index
from .metrics import EvalConfig, MetricReport, alpha_ndcg, coverage, kendall_tau, recall
from .report import grounding_report, query_shift, ranking_correlation, source_distribution
from .runs import RunList
from .snapshot import DocumentChunk, SnapshotManifest, build_corpus, chunk_file

__all__ = [
    "DocumentChunk", "EmbeddingProviderSpec", "EvalConfig", "InvertedIndex",
    "MetricReport", "Pool", "QueryRecord", "QuerySetting", "RunList",
    "SnapshotManifest", "SupportMatrix", "VectorStore", "__version__",
    "alpha_ndcg", "bm25_search", "build_corpus", "build_index", "build_pool",
    "chunk_file", "coverage", "dense_search", "derive_qrels", "embed", "fuse",
    "grounding_report", "judge_query", "kendall_tau", "minmax_normalize",
    "query_shift", "ranking_correlation", "recall", "source_distribution",
]
