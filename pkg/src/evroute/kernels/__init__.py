"""Hot-kernel backend selection.

The compiled Cython extension is used when it built successfully; the pure
numpy twin is the fallback. Set EVROUTE_PURE=1 to force the fallback (the
test suite uses this to cross-check the two).
"""

from __future__ import annotations

import os

from ._pure import KIND_CUSTOMER, KIND_DEPOT, KIND_STATION
from . import _pure

if os.environ.get("EVROUTE_PURE"):
    _impl = _pure
    BACKEND = "python"
else:
    try:
        from . import _fast as _impl  # type: ignore[no-redef]
        BACKEND = "compiled"
    except ImportError:
        _impl = _pure
        BACKEND = "python"

adjacency_matrix = _impl.adjacency_matrix
mask_row = _impl.mask_row

__all__ = [
    "BACKEND",
    "KIND_CUSTOMER",
    "KIND_DEPOT",
    "KIND_STATION",
    "adjacency_matrix",
    "mask_row",
]
