"""Build script for the optional compiled kernel extension.

The package works without the extension (a pure-numpy fallback is selected at
import time); building it just makes dense operator assembly much faster.
"""

import os

from setuptools import Extension, setup

ext_modules = []
try:
    if not os.path.exists(os.path.join("src", "lovebem", "_kernels.pyx")):
        raise ImportError("no kernel source present")
    import numpy
    from Cython.Build import cythonize

    extra_compile = ["-O3", "-ffast-math"]
    extra_link = []
    if os.environ.get("LOVEBEM_NO_OPENMP") != "1":
        extra_compile.append("-fopenmp")
        extra_link.append("-fopenmp")

    ext_modules = cythonize(
        [
            Extension(
                "lovebem._kernels",
                sources=["src/lovebem/_kernels.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                extra_compile_args=extra_compile,
                extra_link_args=extra_link,
            )
        ],
        language_level=3,
    )
except ImportError:
    # No Cython available: install the pure-Python package only.
    ext_modules = []

setup(ext_modules=ext_modules)
