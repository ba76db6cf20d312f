"""Kernel back-end selection.

The compiled extension is used when it was built; setting
``MINPOWER_NET_PURE=1`` forces the NumPy fallback.
"""

from __future__ import annotations

import os

from . import _pykernels

dense_first_excl = _pykernels.dense_first_excl

if os.environ.get("MINPOWER_NET_PURE", "") not in ("", "0"):
    apply_obstructor = _pykernels.apply_obstructor
    BACKEND = "python"
else:
    try:
        from ._ckernels import apply_obstructor
        BACKEND = "cython"
    except ImportError:  # extension not built
        apply_obstructor = _pykernels.apply_obstructor
        BACKEND = "python"

__all__ = ["BACKEND", "apply_obstructor", "dense_first_excl"]
