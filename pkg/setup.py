"""Builds the compiled recurrence kernel.

The package works without it (a pure-numpy fallback is selected at import),
so a missing Cython toolchain only costs speed, not functionality.
"""
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [Extension("kljnsim._recurrence", sources=["src/kljnsim/_recurrence.pyx"])],
        language_level="3",
    )
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules)
