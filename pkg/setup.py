"""Build hook for the optional compiled BM25 kernel.

The package works without the extension (a numpy fallback is selected at
import time); set CORPUSDRIFT_NO_EXT=1 to skip compilation entirely.
"""

import os

from setuptools import Extension, setup


def extensions():
    if os.environ.get("CORPUSDRIFT_NO_EXT") == "1":
        return []
    try:
        import numpy
        from Cython.Build import cythonize
    except ImportError:
        return []
    ext = Extension(
        "corpusdrift._kernels._bm25",
        ["src/corpusdrift/_kernels/_bm25.pyx"],
        include_dirs=[numpy.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    return cythonize([ext], compiler_directives={"language_level": "3"})


setup(ext_modules=extensions())
