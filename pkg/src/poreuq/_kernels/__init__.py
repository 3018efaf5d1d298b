"""Backend selection for the numerical kernels.

The compiled extension is used when it imports; otherwise the numpy
fallback is used. Setting ``POREUQ_BACKEND=python`` forces the fallback.
"""

import os

from . import _fallback

BACKEND = "python"
_impl = _fallback

if os.environ.get("POREUQ_BACKEND", "").lower() != "python":
    try:
        from . import _core as _impl  # noqa: F811

        BACKEND = "cython"
    except ImportError:
        _impl = _fallback

pcr_solve = _impl.pcr_solve
gauss_sum_1d = _impl.gauss_sum_1d
gauss_sum_2d = _impl.gauss_sum_2d

__all__ = ["BACKEND", "pcr_solve", "gauss_sum_1d", "gauss_sum_2d", "get_backend"]


def get_backend(name=None):
    """Return the kernel module for ``name`` ('cython', 'python' or None)."""
    if name is None:
        return _impl
    if name == "python":
        return _fallback
    if name == "cython":
        from . import _core

        return _core
    raise ValueError(f"unknown backend {name!r}")
