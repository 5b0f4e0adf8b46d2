from setuptools import setup

# The compiled kernel is optional: if Cython or a C compiler is missing,
# fall back to the pure-Python kernel selected at import time.
ext_modules = []
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        ["src/acw/_kernel/_speedups.pyx"],
        language_level=3,
    )
except Exception as exc:  # pragma: no cover
    import sys

    print(f"acw: building without compiled kernel ({exc})", file=sys.stderr)

setup(ext_modules=ext_modules)
