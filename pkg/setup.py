"""Build the optional compiled MPFR kernels.

The extension links against the same MPFR/GMP shared objects that the
installed ``gmpy2`` wheel loads, so both sides share one MPFR instance.
If anything about the build fails, the package installs without it and
falls back to the pure-Python kernels at import time.
"""

import glob
import os
import sys

from setuptools import setup
from setuptools.command.build_ext import build_ext


def _gmpy2_paths():
    import gmpy2

    pkg_dir = os.path.dirname(gmpy2.__file__)
    libs_dir = os.path.join(os.path.dirname(pkg_dir), "gmpy2.libs")
    bundled = sorted(glob.glob(os.path.join(libs_dir, "libmpfr*.so*")) + glob.glob(os.path.join(libs_dir, "libgmp-*.so*")))
    return pkg_dir, libs_dir, bundled


def _extensions():
    try:
        from Cython.Build import cythonize
        from setuptools import Extension

        pkg_dir, libs_dir, bundled = _gmpy2_paths()
    except ImportError:
        return []
    if bundled:
        link = dict(extra_objects=bundled, runtime_library_dirs=[libs_dir])
    else:
        link = dict(libraries=["mpfr", "gmp"])
    ext = Extension(
        "gaussent.mpnum._ckernels",
        ["src/gaussent/mpnum/_ckernels.pyx"],
        include_dirs=[pkg_dir],
        extra_compile_args=["-O2"],
        **link,
    )
    try:
        return cythonize([ext], include_path=[os.path.dirname(pkg_dir)], quiet=True)
    except Exception as exc:  # noqa: BLE001
        print(f"warning: could not cythonize kernels ({exc}); using pure-Python fallback", file=sys.stderr)
        return []


class OptionalBuildExt(build_ext):
    def run(self):
        try:
            super().run()
        except Exception as exc:  # noqa: BLE001
            print(f"warning: compiled kernels not built ({exc}); using pure-Python fallback", file=sys.stderr)

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:  # noqa: BLE001
            print(f"warning: failed to build {ext.name} ({exc})", file=sys.stderr)


setup(ext_modules=_extensions(), cmdclass={"build_ext": OptionalBuildExt})
