import glob

from pybind11.setup_helpers import Pybind11Extension, build_ext
from setuptools import setup

ext = Pybind11Extension(
    "cakd._cakd",
    sorted(glob.glob("src/*.cpp")) + ["python/bindings.cpp"],
    include_dirs=["include"],
    cxx_std=20,
)

setup(
    packages=["cakd"],
    package_dir={"cakd": "python/cakd"},
    ext_modules=[ext],
    cmdclass={"build_ext": build_ext},
)
