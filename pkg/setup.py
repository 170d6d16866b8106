"""Build script for the optional compiled assembly kernels.

The package works without the extension: biotsplit.backend falls back to
vectorized numpy kernels when the compiled module is missing.
"""

import numpy
from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class OptionalBuildExt(build_ext):
    """Build the Cython core if possible, otherwise install pure Python."""

    def run(self):
        try:
            super().run()
        except Exception as exc:
            print(f"skipping compiled kernels (build_ext failed): {exc}")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            print(f"skipping {ext.name}: {exc}")


def extensions():
    try:
        from Cython.Build import cythonize
    except ImportError:
        return []
    return cythonize(
        [
            Extension(
                "biotsplit._kernels",
                ["src/biotsplit/_kernels.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level="3",
    )


setup(ext_modules=extensions(), cmdclass={"build_ext": OptionalBuildExt})
