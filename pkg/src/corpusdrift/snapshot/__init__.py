"""Time-pinned repository snapshots and corpus construction."""

from .chunker import chunk_file, is_notebook
from .corpus import CorpusStats, build_corpus
from .documents import DocumentChunk, format_doc_id, parse_doc_id, read_corpus, write_corpus
from .files import FilePolicy, enumerate_files
from .gitrepo import checkout, clone, default_branch, resolve_commit
from .manifest import RepoPin, SnapshotManifest, load_manifest
from .tokenizers import PieceTokenizer, Tokenizer, get_tokenizer, register_tokenizer

__all__ = [
    "CorpusStats", "DocumentChunk", "FilePolicy", "PieceTokenizer", "RepoPin",
    "SnapshotManifest", "Tokenizer", "build_corpus", "checkout", "chunk_file",
    "clone", "default_branch", "enumerate_files", "format_doc_id",
    "get_tokenizer", "is_notebook", "load_manifest", "parse_doc_id",
    "read_corpus", "register_tokenizer", "resolve_commit", "write_corpus",
]
