from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    ext_modules = []
else:
    ext_modules = cythonize(
        [Extension("blochhom._assembly", ["src/blochhom/_assembly.pyx"], optional=True,
                   extra_compile_args=["-O3"])],
        compiler_directives={"language_level": 3},
    )

setup(ext_modules=ext_modules)
