"""Backend selection for the solver kernels.

The compiled extension is used when it imports; setting the environment
variable ``NBSPECTRA_PURE_PYTHON=1`` forces the numpy fallback.
"""
import os

import numpy as np

from . import _kernels_py

CONVERGED, MAX_ITER, DIVERGED, POLE = (_kernels_py.CONVERGED, _kernels_py.MAX_ITER,
                                       _kernels_py.DIVERGED, _kernels_py.POLE)

_impl = _kernels_py
BACKEND = "python"
if os.environ.get("NBSPECTRA_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled
    except ImportError:
        pass
    else:
        _impl = _compiled
        BACKEND = "cython"


def _index(a):
    return np.ascontiguousarray(a, dtype=np.int_)


def fixed_point(hd, minv, moff, fptr, fidx, r0, damping=0.5, max_iter=2000, tol=1e-10,
                blowup=1e8, impl=None):
    impl = impl or _impl
    return impl.fixed_point(hd, minv, moff, _index(fptr), _index(fidx),
                            np.asarray(r0, dtype=complex), float(damping), int(max_iter),
                            float(tol), float(blowup))


def newton_charts(hd, minv, moff, fptr, fidx, w0, chart0, max_iter=60, tol=1e-12,
                  switch=2.0, blowup=1e12, impl=None):
    impl = impl or _impl
    return impl.newton_charts(hd, minv, moff, _index(fptr), _index(fidx),
                              np.asarray(w0, dtype=complex),
                              np.asarray(chart0, dtype=np.int8), int(max_iter), float(tol),
                              float(switch), float(blowup))


def backends():
    """Available kernel implementations by name."""
    out = {"python": _kernels_py}
    try:
        from . import _kernels as _compiled
    except ImportError:
        return out
    out["cython"] = _compiled
    return out
