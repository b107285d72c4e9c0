"""Builds the optional Cython kernel extension; a failed build is not fatal
(the package falls back to the pure numpy kernels at import)."""

from setuptools import setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize

    ext_modules = cythonize(
        ["src/evroute/kernels/_fast.pyx"],
        compiler_directives={"language_level": 3},
    )
    for ext in ext_modules:
        ext.include_dirs.append(numpy.get_include())
        ext.define_macros.append(("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION"))
except ImportError:
    pass

setup(ext_modules=ext_modules)
