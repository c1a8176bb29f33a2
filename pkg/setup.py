"""Build script: compiles the optional accelerator extension.

The package works without the extension (a pure-Python backend is selected at
import time), so any failure here downgrades to a warning instead of breaking
the install. Set RCMLAB_PURE_PYTHON=1 to skip the compile step entirely.
"""

import os

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class optional_build_ext(build_ext):
    def run(self):
        try:
            super().run()
        except Exception as exc:  # compiler missing, etc.
            print(f"warning: compiled kernels skipped ({exc}); "
                  "falling back to the pure-Python backend")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            print(f"warning: could not build {ext.name} ({exc}); "
                  "falling back to the pure-Python backend")


ext_modules = []
pyx = os.path.join("src", "rcmlab", "_kernels", "_ckern.pyx")
if os.environ.get("RCMLAB_PURE_PYTHON") != "1" and os.path.exists(pyx):
    try:
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [Extension("rcmlab._kernels._ckern", sources=[pyx], language="c++")],
            language_level="3",
        )
    except ImportError:
        pass

setup(ext_modules=ext_modules, cmdclass={"build_ext": optional_build_ext})
