import numpy as np
from setuptools import Extension, setup

# The compiled kernel is optional: without Cython (or a working compiler)
# the package falls back to the numpy implementation at import time.
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "crosspeak._kernels",
                ["src/crosspeak/_kernels.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ]
    )
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules)
