"""Kernel backend selection.

The compiled extension ``_kernels`` is used when it imports; otherwise, or when
MANIFOLD_BM_PURE=1 is set, the NumPy fallback ``_kernels_py`` is used.
``BACKEND`` names the active implementation.
"""

import os

from . import _kernels_py as fallback

compiled = None
if os.environ.get("MANIFOLD_BM_PURE", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as compiled
    except ImportError:
        compiled = None

_impl = compiled if compiled is not None else fallback
BACKEND = "compiled" if compiled is not None else "python"

normals = _impl.normals
normals_over_steps = _impl.normals_over_steps
so3_right_exp = _impl.so3_right_exp
so3_exp_walk = _impl.so3_exp_walk
torus_chain_histogram = _impl.torus_chain_histogram
so3_polar = _impl.so3_polar
so3_residual = _impl.so3_residual
