import os

import numpy as np
from setuptools import Extension, setup

# The compiled core is optional: without Cython or a compiler the package
# still imports and runs on the numpy fallback.
ext_modules = []
if os.environ.get("POREUQ_NO_EXT", "") != "1":
    try:
        from Cython.Build import cythonize
    except ImportError:
        cythonize = None
    if cythonize is not None:
        ext_modules = cythonize(
            [
                Extension(
                    "poreuq._kernels._core",
                    ["src/poreuq/_kernels/_core.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
