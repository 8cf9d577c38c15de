"""Build script; compiles the optional C kernel when Cython is available.

The package is pure Python by default.  If Cython and a C compiler are
present, `dx._kernel_c` is built and picked up automatically at import
time; otherwise the pure-Python kernel in `dx._kernel` is used.  Set
DX_NO_EXTENSION=1 to skip the extension build entirely.
"""

import os

from setuptools import setup

ext_modules = []
if not os.environ.get("DX_NO_EXTENSION"):
    try:
        from Cython.Build import cythonize

        ext_modules = cythonize(
            ["src/dx/_kernel_c.pyx"],
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        pass

setup(ext_modules=ext_modules)
