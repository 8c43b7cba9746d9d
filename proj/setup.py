import glob

from pybind11.setup_helpers import Pybind11Extension, build_ext
from setuptools import setup

# the extension carries the whole core; the cmake build stays the dev path
ext = Pybind11Extension(
    "rbmlab._core",
    sources=sorted(glob.glob("src/*.cpp")),
    include_dirs=["include", "vendor"],
    cxx_std=20,
)

setup(ext_modules=[ext], cmdclass={"build_ext": build_ext})
