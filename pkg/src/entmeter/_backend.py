"""Selects the compiled kernels when importable, else the pure-Python fallback.

Set ``ENTMETER_PURE_PYTHON=1`` to force the fallback.
"""

import importlib
import os

from . import _fallback


def load(name=None):
    """Return the kernel module for ``"cython"``, ``"python"``, or the default choice."""
    if name == "python":
        return _fallback
    if name == "cython":
        return importlib.import_module("entmeter._kernels")
    if os.environ.get("ENTMETER_PURE_PYTHON"):
        return _fallback
    try:
        return importlib.import_module("entmeter._kernels")
    except ImportError:
        return _fallback


kernels = load()
BACKEND = "python" if kernels is _fallback else "cython"
