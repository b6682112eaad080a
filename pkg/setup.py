import os

import numpy as np
from Cython.Build import cythonize
from setuptools import Extension, setup

numpy_random_lib = os.path.join(os.path.dirname(np.__file__), "random", "lib")

extensions = [
    Extension(
        "anscombe._kernels._compiled",
        ["src/anscombe/_kernels/_compiled.pyx"],
        include_dirs=[np.get_include()],
        library_dirs=[numpy_random_lib],
        libraries=["npyrandom"],
        extra_compile_args=["-O3"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
]

setup(
    ext_modules=cythonize(
        extensions,
        compiler_directives={"language_level": "3"},
    )
)
