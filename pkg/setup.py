"""Build script for the optional compiled Monte Carlo core.

The package works without the extension: ``bayesmpc.backend`` falls back to
the pure-numpy implementation in ``bayesmpc._mckernels_py`` when the
compiled module is missing.
"""

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None


if cythonize is not None:
    extensions = [
        Extension(
            "bayesmpc._mckernels",
            sources=["src/bayesmpc/_mckernels.pyx"],
        )
    ]
    setup(ext_modules=cythonize(extensions, language_level=3))
else:
    # No Cython available: install pure-Python only.
    setup()
