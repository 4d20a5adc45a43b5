import os

from setuptools import Extension, setup

# The compiled kernel is optional: without Cython (or with PREDLEARN_NO_EXT=1)
# the package installs and runs on the pure-Python kernel.
ext_modules = []
if not os.environ.get("PREDLEARN_NO_EXT"):
    try:
        from Cython.Build import cythonize
    except ImportError:
        cythonize = None
    if cythonize is not None:
        ext_modules = cythonize(
            [Extension("predlearn._ckernel", ["src/predlearn/_ckernel.pyx"],
                       # no fused multiply-add, so results match the Python kernel bit for bit
                       extra_compile_args=["-O2", "-ffp-contract=off"])],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
