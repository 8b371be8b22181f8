"""Backend selection for the hot loops.

The compiled extension is used when importable; setting
``GAZEKIT_PURE_PYTHON=1`` forces the pure-Python fallback.
"""
import os

from . import _pykernels

if os.environ.get("GAZEKIT_PURE_PYTHON") == "1":
    _impl = _pykernels
else:
    try:
        from . import _ckernels as _impl
    except ImportError:
        _impl = _pykernels

BACKEND = "cython" if _impl is not _pykernels else "python"

nw_fill = _impl.nw_fill
idt_windows = _impl.idt_windows
gaussian_accumulate = _impl.gaussian_accumulate


def backends():
    """Available kernel modules keyed by name."""
    found = {"python": _pykernels}
    try:
        from . import _ckernels
    except ImportError:
        pass
    else:
        found["cython"] = _ckernels
    return found
