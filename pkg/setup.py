import numpy
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

if cythonize is not None:
    ext_modules = cythonize(
        [
            Extension(
                "almrl._kernels",
                ["src/almrl/_kernels.pyx"],
                include_dirs=[numpy.get_include()],
            )
        ],
        language_level=3,
    )
else:
    # Pure-Python fallback in almrl._kernels_py is selected at import time.
    ext_modules = []

setup(ext_modules=ext_modules)
