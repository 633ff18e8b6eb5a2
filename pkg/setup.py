"""Build script: compiles the optional Cython kernel extension.

Set DYNNMF_SKIP_EXT=1 to install without the compiled kernels; the
package falls back to the NumPy implementations at import time.
"""

import os

from setuptools import Extension, setup

ext_modules = []
if not os.environ.get("DYNNMF_SKIP_EXT"):
    import numpy
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "dynnmf._kernels._fast",
                ["src/dynnmf/_kernels/_fast.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        language_level=3,
    )

setup(ext_modules=ext_modules)
