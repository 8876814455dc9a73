"""Build shim for the optional compiled kernels.

The package is pure Python plus one Cython extension (provsem._speedups)
holding the embedding-training inner loop.  If Cython or a C compiler is
missing, the build degrades gracefully and the NumPy fallback kernels are
used at runtime instead.  Set PROVSEM_NO_EXT=1 to skip the extension
build entirely.
"""

import os
import sys

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class optional_build_ext(build_ext):
    """build_ext that downgrades compile failures to a warning."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # compiler missing, broken toolchain, ...
            self._skip(exc)

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            self._skip(exc)

    @staticmethod
    def _skip(exc):
        sys.stderr.write(
            "WARNING: building provsem._speedups failed (%s); "
            "the pure NumPy kernels will be used instead.\n" % (exc,)
        )


def extensions():
    if os.environ.get("PROVSEM_NO_EXT"):
        return []
    try:
        from Cython.Build import cythonize
    except ImportError:
        sys.stderr.write(
            "WARNING: Cython not available; installing without compiled kernels.\n"
        )
        return []
    ext = Extension(
        "provsem._speedups",
        sources=["src/provsem/_speedups.pyx"],
        extra_compile_args=["-O3"],
    )
    return cythonize([ext], language_level="3")


setup(ext_modules=extensions(), cmdclass={"build_ext": optional_build_ext})
