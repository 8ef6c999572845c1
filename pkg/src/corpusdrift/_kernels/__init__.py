"""BM25 scoring kernels: compiled extension with a numpy fallback.

The compiled kernel is used when the extension built; otherwise the numpy
implementation is selected at import time.  Both compute the same
floating-point operations in the same order, so results are bit-identical
(see benchmarks/bench_bm25.py for the speed comparison).
"""

from __future__ import annotations

try:
    from ._bm25 import bm25_accumulate

    BACKEND = "cython"
except ImportError:  # extension not built on this install
    from ._pybm25 import bm25_accumulate

    BACKEND = "python"

__all__ = ["BACKEND", "bm25_accumulate", "available_backends", "load_backend"]


def available_backends() -> list[str]:
    names = ["python"]
    try:
        from . import _bm25  # noqa: F401
        names.append("cython")
    except ImportError:
        pass
    return names


def load_backend(name: str):
    """Fetch a specific kernel implementation (used by the benchmark)."""
    if name == "python":
        from ._pybm25 import bm25_accumulate as fn
        return fn
    if name == "cython":
        from ._bm25 import bm25_accumulate as fn
        return fn
    raise ValueError(f"unknown kernel backend {name!r}")
