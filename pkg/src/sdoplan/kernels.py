"""Simplex kernel backend selection.

The compiled extension is preferred when present; the numpy module is the
fallback.  ``SDOPLAN_PURE_PYTHON=1`` forces the fallback.  Both backends
implement the same three functions with identical tie-breaking, so solver
results do not depend on which one is active.
"""

import os

from . import _kernels_py

try:
    from . import _simplex_kernels  # compiled, optional
except ImportError:
    _simplex_kernels = None


def available_backends():
    out = {"python": _kernels_py}
    if _simplex_kernels is not None:
        out["compiled"] = _simplex_kernels
    return out


def _pick_default():
    if os.environ.get("SDOPLAN_PURE_PYTHON"):
        return "python"
    return "compiled" if _simplex_kernels is not None else "python"


_active_name = _pick_default()


def set_backend(name):
    global _active_name
    if name not in available_backends():
        raise ValueError(f"unknown kernel backend {name!r}; "
                         f"have {sorted(available_backends())}")
    _active_name = name


def backend_name():
    return _active_name


def active():
    return available_backends()[_active_name]
