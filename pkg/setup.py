import numpy
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "tamelab._kernels._cauchy",
                ["src/tamelab/_kernels/_cauchy.pyx"],
                extra_compile_args=["-O3", "-ffast-math"],
                include_dirs=[numpy.get_include()],
            )
        ],
        language_level=3,
    )
except ImportError:
    # pure-Python install still works; the scipy fallback kernel is used
    extensions = []

setup(ext_modules=extensions)
