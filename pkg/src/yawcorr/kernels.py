"""Backend selection for the hot kernels.

The compiled extension is used when importable; set ``YAWCORR_BACKEND=python``
to force the pure-Python fallback (``=compiled`` makes a missing build an error).
"""

from __future__ import annotations

import importlib
import os

from . import _pykernels


def load_backend(name: str | None = None):
    """Return (backend name, module) for ``name`` in {"auto", "compiled", "python"}."""
    name = (name or os.environ.get("YAWCORR_BACKEND", "auto")).lower()
    if name not in ("auto", "compiled", "python"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "python":
        return "python", _pykernels
    try:
        mod = importlib.import_module("yawcorr._kernels")
    except ImportError:
        if name == "compiled":
            raise
        return "python", _pykernels
    return "compiled", mod


BACKEND, _impl = load_backend()
smo_solve = _impl.smo_solve
kernel_matrix = _impl.kernel_matrix
build_tree = _impl.build_tree
forest_predict = _impl.forest_predict
