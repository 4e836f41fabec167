"""Builds the optional compiled union-find kernel.

The package is fully functional without it (a pure-Python twin is selected
at import time), so a failed extension build is downgraded to a warning.
"""

import sys

from setuptools import setup


def _extensions():
    try:
        from Cython.Build import cythonize
    except ImportError:
        print("fplower: Cython not available, skipping compiled kernel", file=sys.stderr)
        return []
    return cythonize(
        ["src/fplower/_ufkern.pyx"],
        language_level=3,
        compiler_directives={"boundscheck": False, "wraparound": False},
    )


setup(ext_modules=_extensions())
