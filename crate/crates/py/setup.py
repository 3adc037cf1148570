"""Build the cylwalk_py extension by delegating to cargo.

Plain setuptools is enough here: the Extension is a stub whose build step
runs `cargo build --release -p cylwalk-py` and copies the produced cdylib
to the location setuptools expects.
"""

import shutil
import subprocess
import sysconfig
from pathlib import Path

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext

HERE = Path(__file__).resolve().parent


class CargoBuildExt(build_ext):
    def build_extension(self, ext):
        subprocess.run(
            ["cargo", "build", "--release", "-p", "cylwalk-py"],
            cwd=HERE,
            check=True,
        )
        target = HERE.parent.parent / "target" / "release"
        for name in ("libcylwalk_py.so", "libcylwalk_py.dylib", "cylwalk_py.dll"):
            src = target / name
            if src.exists():
                break
        else:
            raise FileNotFoundError(f"no cdylib found under {target}")
        dest = Path(self.get_ext_fullpath(ext.name))
        dest.parent.mkdir(parents=True, exist_ok=True)
        shutil.copy2(src, dest)


setup(
    ext_modules=[Extension("cylwalk_py", sources=[])],
    cmdclass={"build_ext": CargoBuildExt},
    options={"build_ext": {}},
)
