"""Picks the compiled kernels when they import, else the pure-Python ones.

Set ``SYMMATCH_PURE_PYTHON=1`` to force the fallback.
"""

import os

if os.environ.get("SYMMATCH_PURE_PYTHON") == "1":
    from . import _kernels_py as impl
    BACKEND = "python"
else:
    try:
        from . import _kernels as impl  # type: ignore[attr-defined]
        BACKEND = "cython"
    except ImportError:
        from . import _kernels_py as impl
        BACKEND = "python"

dijkstra = impl.dijkstra
nn_argmin = impl.nn_argmin

__all__ = ["BACKEND", "dijkstra", "nn_argmin"]
