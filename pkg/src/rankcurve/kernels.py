"""Kernel backend selection.

The compiled ``_ckernels`` extension is used when importable; otherwise the
pure-Python ``_pykernels`` module.  Setting ``RANKCURVE_PURE_PYTHON=1`` forces
the fallback (used by the benchmark and the backend-agreement tests).
"""

import os

from . import _pykernels

pure = _pykernels

if os.environ.get("RANKCURVE_PURE_PYTHON", "") not in ("", "0"):
    backend = _pykernels
    compiled = None
else:
    try:
        from . import _ckernels as compiled
    except ImportError:  # extension not built
        compiled = None
    backend = compiled if compiled is not None else _pykernels

BACKEND = backend.NAME

eval_system = backend.eval_system
lu_solve = backend.lu_solve
jacobi_eigen = backend.jacobi_eigen
