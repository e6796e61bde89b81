import numpy
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

extensions = []
if cythonize is not None:
    extensions = cythonize(
        [
            Extension(
                "cdconv._core",
                ["src/cdconv/_core.pyx"],
                include_dirs=[numpy.get_include()],
                language="c++",
                extra_compile_args=["-O3"],
            )
        ],
        language_level="3",
    )

setup(ext_modules=extensions)
