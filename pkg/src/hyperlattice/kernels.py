"""Backend selection for the hot loops.

The compiled extension ``_kernels`` is used when it was built; otherwise,
or when ``HYPERLATTICE_PURE_PYTHON=1`` is set, the pure-Python versions in
``_kernels_py`` are used.  Both expose the same functions.
"""
import os

from . import _kernels_py

try:
    if os.environ.get("HYPERLATTICE_PURE_PYTHON") == "1":
        raise ImportError("pure-Python backend forced")
    from . import _kernels as _compiled
except ImportError:
    _compiled = None

BACKEND = "compiled" if _compiled is not None else "python"

MODE_SINGLE = _kernels_py.MODE_SINGLE
MODE_IDLE_PREF = _kernels_py.MODE_IDLE_PREF
MODE_FIXED = _kernels_py.MODE_FIXED
MODE_CALLBACK = _kernels_py.MODE_CALLBACK


def get_backend(name=None):
    """Return the kernel module for ``name`` ('compiled', 'python' or None)."""
    if name is None:
        return _compiled or _kernels_py
    if name == "python":
        return _kernels_py
    if name == "compiled":
        if _compiled is None:
            raise RuntimeError("compiled kernels are not available; rebuild the extension")
        return _compiled
    raise ValueError(f"unknown backend {name!r}")


def enumerate_states(servers, K):
    return get_backend().enumerate_states(servers, K)
