"""Build script: compiles the optional Cython codec kernel.

The package works without the extension (a pure-Python kernel is selected
at import time), so a missing Cython toolchain only costs speed.
"""

from setuptools import setup

ext_modules = []
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        ["src/campsim/compression/_kernels.pyx"],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
