from setuptools import Extension, setup
from Cython.Build import cythonize

ext_modules = [
    Extension(
        "hisariq.nn._kernels",
        ["src/hisariq/nn/_kernels.pyx"],
        extra_compile_args=["-O3"],
    )
]

setup(ext_modules=cythonize(ext_modules, language_level="3"))
