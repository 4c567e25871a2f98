"""Builds the optional compiled kernel extension.

The package works without it: hypomimiacoach.kernels falls back to the
pure-numpy backend when the extension is missing or HC_PURE_PYTHON is set.
"""

import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

extensions = [
    Extension(
        "hypomimiacoach.kernels._fast",
        ["src/hypomimiacoach/kernels/_fast.pyx"],
        include_dirs=[np.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        extra_compile_args=["-O3"],
    )
]

setup(
    ext_modules=cythonize(
        extensions,
        compiler_directives={"language_level": "3"},
    )
    if cythonize
    else [],
)
