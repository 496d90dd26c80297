"""Kernel dispatch: compiled Cauchy products when available, numpy otherwise.

The compiled module is selected at import. Set ``FLATJET_PURE=1`` to force
the numpy path. Object arrays (exact scalars) always use the numpy path.
"""
from __future__ import annotations

import os

import numpy as np

from . import _pykernels

_compiled = None
if os.environ.get("FLATJET_PURE", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _compiled  # type: ignore[attr-defined]
    except ImportError:  # extension not built
        _compiled = None

BACKEND = "compiled" if _compiled is not None else "python"
_FAST = (np.dtype(np.float64), np.dtype(np.complex128))


def _use_compiled(*arrays) -> bool:
    if _compiled is None:
        return False
    return all(a.dtype in _FAST for a in arrays)


def row_product(A, B, o, width, nzA=None, nzB=None, backend=None):
    if backend == "python" or not _use_compiled(A, B):
        return _pykernels.row_product(A, B, o, width, nzA, nzB)
    return _compiled.row_product(A, B, o, width, nzA, nzB)


def cauchy2d(a, b, backend=None):
    if backend == "python" or not _use_compiled(a, b):
        return _pykernels.cauchy2d(a, b)
    return _compiled.cauchy2d(a, b)


def available_backends() -> list[str]:
    return ["python"] + (["compiled"] if _compiled is not None else [])
