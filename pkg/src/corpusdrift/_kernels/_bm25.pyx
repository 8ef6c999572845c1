# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled BM25 scoring kernel.

Keep the floating-point operation order identical to _pybm25.py so the
two backends return bit-identical scores.
"""


def bm25_accumulate(double[::1] scores, int[::1] ordinals, double[::1] tfs,
                    double weight, double k1_plus_1, double[::1] norms):
    cdef Py_ssize_t j, n = ordinals.shape[0]
    cdef int d
    with nogil:
        for j in range(n):
            d = ordinals[j]
            scores[d] += weight * ((tfs[j] * k1_plus_1) / (tfs[j] + norms[d]))
