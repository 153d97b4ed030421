"""Build script: compiles the optional Cython event kernel.

The package is fully functional without the extension (a NumPy fallback is
selected at import time), so any build failure here downgrades to a warning
instead of breaking the install.
"""

import warnings

from setuptools import setup
from setuptools.command.build_ext import build_ext


def _extensions():
    try:
        import numpy
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError as exc:
        warnings.warn(f"Cython/NumPy unavailable ({exc}); building without the compiled kernel")
        return []
    ext = Extension(
        "escseg.events._kernel",
        sources=["src/escseg/events/_kernel.pyx"],
        include_dirs=[numpy.get_include()],
        # -ffp-contract=off: the fallback kernel must match bit-for-bit, so FMA
        # contraction of the crossing-time arithmetic is disabled.
        extra_compile_args=["-O2", "-ffp-contract=off"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    return cythonize([ext], language_level=3)


class OptionalBuildExt(build_ext):
    def run(self):
        try:
            super().run()
        except Exception as exc:
            warnings.warn(f"compiled kernel build failed ({exc}); the NumPy fallback will be used")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            warnings.warn(f"compiled kernel build failed ({exc}); the NumPy fallback will be used")


setup(ext_modules=_extensions(), cmdclass={"build_ext": OptionalBuildExt})
