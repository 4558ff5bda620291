from setuptools import Extension, setup

# The compiled stepper is an optional speedup: if the toolchain is missing the
# build proceeds and dsim falls back to the pure-numpy kernel at import time.
try:
    import numpy as np
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "dsim.kernels._compiled",
                ["src/dsim/kernels/_compiled.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                optional=True,
            )
        ],
        language_level=3,
    )
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules)
