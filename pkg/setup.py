"""Build script: compiles the optional z-buffer kernel.

The compiled extension is a pure speedup; if Cython or a C compiler is
missing the install falls back to the numpy implementation in
``chiralis.raster._zbuffer_py``.
"""

from setuptools import setup
from setuptools.command.build_ext import build_ext


class OptionalBuildExt(build_ext):
    """Never fail the install because the extension did not compile."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # pragma: no cover - depends on toolchain
            print(f"chiralis: skipping compiled kernel ({exc!r}); "
                  "falling back to pure-Python rasterizer")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:  # pragma: no cover - depends on toolchain
            print(f"chiralis: failed to build {ext.name} ({exc!r}); "
                  "falling back to pure-Python rasterizer")


def _extensions():
    try:
        import numpy
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError:  # pragma: no cover - depends on toolchain
        return []
    ext = Extension(
        "chiralis.raster._zbuffer_cy",
        ["src/chiralis/raster/_zbuffer_cy.pyx"],
        include_dirs=[numpy.get_include()],
        # no FP contraction: the fallback test compares bit-for-bit
        extra_compile_args=["-O3", "-ffp-contract=off"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    return cythonize(
        [ext],
        compiler_directives={
            "language_level": 3,
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
            "initializedcheck": False,
        },
    )


setup(ext_modules=_extensions(), cmdclass={"build_ext": OptionalBuildExt})
