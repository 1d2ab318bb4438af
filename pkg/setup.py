"""Build the optional Cython kernels; the package falls back to numpy when they are absent."""
import os

from setuptools import setup

ext_modules = []
if not os.environ.get("ELMORREY_NO_EXT"):
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "elmorrey._kernels",
                    ["src/elmorrey/_kernels.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
