"""Build script for the compiled stepping kernels.

The package works without the extension (a pure-numpy fallback is selected at
import time), but the compiled core is what makes large ensembles cheap.
"""
from Cython.Build import cythonize
from setuptools import Extension, setup

extensions = [
    Extension(
        "lookahead_traffic.kernels._core",
        ["src/lookahead_traffic/kernels/_core.pyx"],
        extra_compile_args=["-O3"],
    )
]

setup(
    ext_modules=cythonize(
        extensions,
        compiler_directives={"language_level": "3"},
    )
)
