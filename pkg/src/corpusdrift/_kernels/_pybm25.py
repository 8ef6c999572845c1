"""Pure-Python (numpy) BM25 scoring kernel.

Must stay operation-for-operation identical to the compiled kernel in
_bm25.pyx: per posting j with ordinal d,

    scores[d] += weight * ((tfs[j] * k1_plus_1) / (tfs[j] + norms[d]))

so both backends produce bit-identical scores.
"""

from __future__ import annotations

import numpy as np


def bm25_accumulate(scores: np.ndarray, ordinals: np.ndarray, tfs: np.ndarray,
                    weight: float, k1_plus_1: float, norms: np.ndarray) -> None:
    sel = norms[ordinals]
    scores[ordinals] += weight * ((tfs * k1_plus_1) / (tfs + sel))
