import glob

from pybind11.setup_helpers import ParallelCompile, Pybind11Extension, build_ext
from setuptools import setup

ParallelCompile("NPY_NUM_BUILD_JOBS").install()

ext = Pybind11Extension(
    "idealband._core",
    sorted(glob.glob("src/*.cpp")) + ["bindings/module.cpp"],
    include_dirs=["include", "vendor"],
    cxx_std=20,
    define_macros=[("CPPHTTPLIB_OPENSSL_SUPPORT", None)],
    libraries=["ssl", "crypto"],
)

setup(ext_modules=[ext], cmdclass={"build_ext": build_ext})
