"""Hot loops with a compiled backend and a NumPy fallback.

The compiled module is used when it imports; setting ``FRACOU_PURE=1``
forces the fallback.  ``BACKEND`` names the active one.

``bi_tensor`` always runs the NumPy version: its inner loop is one ``pow``
per node pair, and NumPy's vectorized ``pow`` beats the scalar libm call
(see ``benchmarks/bench_kernels.py``).  The compiled version stays for the
benchmark and the agreement tests.
"""

import os

from . import _fallback as fallback

compiled = None
if os.environ.get("FRACOU_PURE", "") not in ("1", "true", "yes"):
    try:
        from . import _core as compiled
    except ImportError:  # extension not built
        compiled = None

_active = compiled if compiled is not None else fallback
BACKEND = "cython" if compiled is not None else "numpy"

bi_tensor = fallback.bi_tensor
ou_filter = _active.ou_filter
ks_normal = _active.ks_normal

__all__ = ["BACKEND", "bi_tensor", "ou_filter", "ks_normal", "fallback", "compiled"]
