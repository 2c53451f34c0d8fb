"""Kernel backend selection.

The compiled extension is used when it was built; set ``CITEMAP_PURE=1`` to
force the pure-Python fallback.
"""
import os

if os.environ.get("CITEMAP_PURE"):
    from . import _pykernels as _impl
else:
    try:
        from . import _ckernels as _impl
    except ImportError:  # extension not built
        from . import _pykernels as _impl

BACKEND = "cython" if _impl.__name__.endswith("_ckernels") else "python"

local_move = _impl.local_move
stress_terms = _impl.stress_terms
