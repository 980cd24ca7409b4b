"""Build the optional compiled Fock-propagation kernel.

The package works without it: ``bosecount.kernel.backend`` falls back to the
numpy implementation when the extension cannot be imported.
"""
import os

from setuptools import setup

ext_modules = []
if os.environ.get("BOSECOUNT_NO_EXT") != "1":
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError:  # build without the extension
        pass
    else:
        ext_modules = cythonize(
            [
                Extension(
                    "bosecount.kernel._fock_ext",
                    sources=["src/bosecount/kernel/_fock_ext.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={
                "language_level": 3,
                "boundscheck": False,
                "wraparound": False,
                "cdivision": True,
            },
        )

setup(ext_modules=ext_modules)
