"""Hot loops with a compiled backend and a pure-Python fallback.

The compiled extension ``_ckernels`` is used when it imports; setting
``SHADOWLAB_PURE_PYTHON=1`` forces the fallback.  Both backends are exact and
return identical results; the wrappers here route inputs that could overflow
int64 to the Python backend.
"""

from __future__ import annotations

import os

from . import _pykernels

_INT_LIMIT = 2**62

try:
    if os.environ.get("SHADOWLAB_PURE_PYTHON"):
        raise ImportError("pure Python requested")
    from . import _ckernels as _compiled
except ImportError:
    _compiled = None

BACKEND = "cython" if _compiled is not None else "python"


def backends() -> dict:
    out = {"python": _pykernels}
    if _compiled is not None:
        out["cython"] = _compiled
    return out


def bs_ball(n, gens, scale, radius, cap, backend=None):
    """See :func:`shadowlab._pykernels.bs_ball`; the caller checks overflow bounds."""
    impl = backends()[backend] if backend else (_compiled or _pykernels)
    return impl.bs_ball(n, list(gens), scale, radius, cap)


def grid_scan(a, b, c, ni, nj, backend=None):
    impl = backends()[backend] if backend else (_compiled or _pykernels)
    if impl is not _pykernels:
        worst = max(
            (abs(x) * ni + abs(y) * nj + abs(z) for x, y, z in zip(a, b, c)), default=0
        )
        if worst >= _INT_LIMIT:
            impl = _pykernels
    return impl.grid_scan(list(a), list(b), list(c), ni, nj)
