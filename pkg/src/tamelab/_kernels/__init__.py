"""Kernel backend selection: compiled Cython extension with scipy fallback.

The environment variable TAMELAB_FORCE_FALLBACK=1 forces the fallback,
which is useful for testing and for pure-Python installs.
"""

from __future__ import annotations

import os

from . import fallback as _fallback

BACKEND = "fallback"
_impl = _fallback.table_apply

if not os.environ.get("TAMELAB_FORCE_FALLBACK"):
    try:
        from . import _cauchy as _ext

        _impl = _ext.table_apply
        BACKEND = "cython"
    except ImportError:
        pass


def table_apply(f, table, ti0, tj0, nti, ntj):
    """Offset-table convolution; see the backend modules for the formula."""
    return _impl(f, table, int(ti0), int(tj0), int(nti), int(ntj))


def backend_name() -> str:
    return BACKEND
