"""Build script for the optional compiled transport kernel.

The package works without the extension; transport solves fall back to a
pure-numpy implementation of the same algorithm.  Any failure to compile
therefore degrades the install instead of aborting it.
"""

from setuptools import Extension, setup


def extension_modules():
    try:
        import numpy
        from Cython.Build import cythonize
    except ImportError:
        return []
    ext = Extension(
        "concdiam._transport_core",
        sources=["src/concdiam/_transport_core.pyx"],
        include_dirs=[numpy.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    try:
        return cythonize([ext], language_level=3)
    except Exception:
        return []


setup(ext_modules=extension_modules())
