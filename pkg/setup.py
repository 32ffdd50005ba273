"""Build script for the optional compiled hit-finding kernels.

The package installs and runs without the extension (a numpy fallback is
selected at import time); the extension is what makes large renders and the
BVH benchmarks fast.
"""

from setuptools import Extension, setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "difftrace.kernels._compiled",
                ["src/difftrace/kernels/_compiled.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
