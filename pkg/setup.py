"""Build the optional Cython rollout kernel.

If Cython or a C compiler is unavailable the package still installs and
falls back to the vectorized NumPy kernel at import time.
"""
import os
import sys

from setuptools import setup

ext_modules = []
if os.environ.get("BCGAIN_NO_EXT", "") != "1":
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension

        extra = [] if sys.platform == "win32" else ["-O3", "-ffp-contract=off"]
        ext_modules = cythonize(
            [
                Extension(
                    "bcgain._kernels",
                    ["src/bcgain/_kernels.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=extra,
                )
            ],
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
