import os

import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # the numpy fallback is used instead
    cythonize = None

ext_modules = []
if cythonize is not None:
    np_random_lib = os.path.join(os.path.dirname(np.__file__), "random", "lib")
    ext_modules = cythonize(
        [
            Extension(
                "bcfeedback._kernels._core",
                ["src/bcfeedback/_kernels/_core.pyx"],
                include_dirs=[np.get_include()],
                library_dirs=[np_random_lib],
                libraries=["npyrandom"],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                optional=True,
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
