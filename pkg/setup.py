import sys

from setuptools import setup

# The compiled kernel is an optimization, not a requirement: if Cython or a C
# compiler is missing the package installs pure-Python and zrp.engine falls
# back to the interpreted kernel at import time.
ext_modules = []
try:
    import numpy as np
    from Cython.Build import cythonize
    from setuptools import Extension

    ext = Extension(
        "zrp._kernel_c",
        ["src/zrp/_kernel_c.pyx"],
        include_dirs=[np.get_include()],
        # no -ffast-math and no FP contraction: the C kernel must be
        # bit-identical to the pure-Python one
        extra_compile_args=["-O3", "-ffp-contract=off"],
    )
    ext_modules = cythonize(
        [ext],
        compiler_directives={"language_level": "3"},
    )
except Exception as exc:  # pragma: no cover - exercised only on broken toolchains
    sys.stderr.write("zrp: building without compiled kernel (%s)\n" % exc)

setup(ext_modules=ext_modules)
