"""Build the optional compiled simulation kernels.

If Cython or a C compiler is missing the package still installs; the
pure-Python kernels are picked up at import time instead.
"""
import os

from setuptools import setup

ext_modules = []
if not os.environ.get("DELAYLAB_NO_EXT"):
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError:
        pass
    else:
        ext_modules = cythonize(
            [Extension(
                "delaylab.sim._ckernels",
                ["src/delaylab/sim/_ckernels.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                # no -ffast-math / -march=native: results must match the
                # Python kernels bit for bit
                extra_compile_args=["-O3"],
            )],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
