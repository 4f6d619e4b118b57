# Builds the optional compiled kernels. If Cython or a C compiler is missing
# the package still installs and falls back to the numpy kernels at import.
import numpy
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "tdbilliards._kernels",
                ["src/tdbilliards/_kernels.pyx"],
                extra_compile_args=["-O3", "-ffp-contract=off", "-fopenmp"],
                extra_link_args=["-fopenmp"],
                include_dirs=[numpy.get_include()],
            )
        ],
        language_level=3,
    )
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules)
