"""Build script for the optional compiled kernels.

The package is fully functional without the extension (a numpy fallback is
selected at import time); the extension is marked optional so installation
never fails on a machine without a C toolchain.
"""

import warnings

from setuptools import setup, Extension


def make_extensions():
    try:
        import numpy
        from Cython.Build import cythonize
    except ImportError as exc:  # pure install, fallback kernels only
        warnings.warn(f"compiled kernels skipped ({exc}); numpy fallback will be used")
        return []
    ext = Extension(
        "graphfill._kernels._ext",
        ["src/graphfill/_kernels/_ext.pyx"],
        include_dirs=[numpy.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        extra_compile_args=["-O3"],
        optional=True,
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


setup(ext_modules=make_extensions())
