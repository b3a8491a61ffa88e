import numpy as np
from Cython.Build import cythonize
from setuptools import Extension, setup

extensions = [
    Extension(
        "topocrit._core",
        ["src/topocrit/_core.pyx"],
        include_dirs=[np.get_include()],
        extra_compile_args=["-O3"],
        language="c++",
    )
]

setup(ext_modules=cythonize(extensions, compiler_directives={"language_level": 3}))
