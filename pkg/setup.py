import os

import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    USE_CYTHON = True
except ImportError:
    USE_CYTHON = False

extensions = []
if USE_CYTHON and not os.environ.get("SEDSEARCH_PURE_PYTHON"):
    extensions = cythonize(
        [
            Extension(
                "sedsearch.exact._bnb",
                ["src/sedsearch/exact/_bnb.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=extensions)
