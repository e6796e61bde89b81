"""Kernel backend selection.

The hot kernels (edge accumulation, grid ball queries, the LIF scan) exist
twice: a compiled Cython core and a pure-NumPy fallback with identical
signatures. The compiled core is preferred when importable; the environment
variable ``CDCONV_BACKEND`` (``compiled`` or ``python``) overrides the choice.
"""

import contextlib
import os

from . import _kernels_py

try:
    from . import _core
except ImportError:
    _core = None

_MODULES = {"python": _kernels_py}
if _core is not None:
    _MODULES["compiled"] = _core


def _initial_backend():
    forced = os.environ.get("CDCONV_BACKEND", "").strip().lower()
    if forced:
        if forced not in ("compiled", "python"):
            raise ValueError(f"CDCONV_BACKEND must be 'compiled' or 'python', got {forced!r}")
        if forced not in _MODULES:
            raise RuntimeError("CDCONV_BACKEND=compiled but the extension is not built")
        return forced
    return "compiled" if _core is not None else "python"


_active = _initial_backend()


def available_backends():
    """Names of the usable backends, preferred first."""
    return ("compiled", "python") if _core is not None else ("python",)


def get_backend():
    return _active


def set_backend(name):
    global _active
    if name not in _MODULES:
        raise ValueError(f"unknown backend {name!r}; available: {sorted(_MODULES)}")
    _active = name


@contextlib.contextmanager
def use_backend(name):
    """Temporarily switch backends (used by the benchmark and tests)."""
    previous = get_backend()
    set_backend(name)
    try:
        yield
    finally:
        set_backend(previous)


def active():
    """The module implementing the currently selected kernels."""
    return _MODULES[_active]
