"""Kernel backend selection.

The compiled extension is preferred when it imported cleanly; set
``FATLAB_FORCE_PYTHON=1`` to force the numpy fallback. ``get_backend``
accepts an explicit name for side-by-side benchmarking.
"""

import os

from . import _kernels_py

try:
    if os.environ.get("FATLAB_FORCE_PYTHON"):
        _kernels = None
    else:
        from . import _kernels
except ImportError:
    _kernels = None

_DEFAULT = _kernels if _kernels is not None else _kernels_py


def available_backends():
    names = ["python"]
    if _kernels is not None:
        names.insert(0, "compiled")
    return names


def get_backend(name="auto"):
    if name in ("auto", None):
        return _DEFAULT
    if name == "python":
        return _kernels_py
    if name == "compiled":
        if _kernels is None:
            raise ValueError("compiled kernels are not available")
        return _kernels
    raise ValueError(f"unknown backend {name!r}")


def active_backend_name():
    return _DEFAULT.BACKEND_NAME
