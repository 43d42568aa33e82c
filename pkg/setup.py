"""Build script for the optional compiled kernels.

The package works without them; ``sann.kernels`` falls back to numpy.
Set ``SANN_NO_EXT=1`` to skip compilation entirely.
"""
import os

import numpy as np
from setuptools import Extension, setup


def _extensions():
    if os.environ.get("SANN_NO_EXT"):
        return []
    try:
        from Cython.Build import cythonize
    except ImportError:
        return []
    npyrandom = os.path.join(os.path.dirname(np.__file__), "random", "lib")
    ext = Extension(
        "sann._kernels",
        ["src/sann/_kernels.pyx"],
        include_dirs=[np.get_include()],
        library_dirs=[npyrandom],
        libraries=["npyrandom"],
        # no FMA contraction: keeps results bitwise equal to the numpy fallback
        extra_compile_args=["-O3", "-ffp-contract=off"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    return cythonize(
        [ext],
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )


setup(ext_modules=_extensions())
