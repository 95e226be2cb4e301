"""Build script: compiles the optional permutation-kernel extension.

The package works without the extension (a pure-Python twin of the kernel
module is selected at import time), so any build failure here downgrades to
a source-only install instead of aborting.
"""

from setuptools import setup

ext_modules = []
try:
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "ssgtree._speedups",
                ["src/ssgtree/_speedups.pyx"],
                extra_compile_args=["-O3"],
            )
        ],
        language_level=3,
    )
except Exception as exc:  # pragma: no cover - only hit without Cython
    print(f"ssgtree: building without compiled kernels ({exc})")

setup(ext_modules=ext_modules)
