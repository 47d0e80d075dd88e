"""Hot-kernel dispatch: compiled Cython core with a pure-numpy fallback.

The backend is chosen once at import: the compiled extension when it built
successfully, otherwise the numpy implementation.  Set ``JETFB_FORCE_NUMPY=1``
to force the fallback (the benchmark and the agreement tests use this to
compare both paths).
"""

from __future__ import annotations

import os

from . import numpy_backend

try:
    from . import _core
except ImportError:
    _core = None

FORCE_NUMPY = os.environ.get("JETFB_FORCE_NUMPY", "0") == "1"
HAVE_COMPILED = _core is not None


def backend_name():
    return "compiled" if (HAVE_COMPILED and not FORCE_NUMPY) else "numpy"


def energy_gradient(v, cells, cell_y, wx, cell_wy, cell_area, cell_weight,
                    tab, lam2, delta, want_diag=False, ordered_sum=False):
    if HAVE_COMPILED and not FORCE_NUMPY:
        return _core.energy_gradient(
            v, cells, cell_y, wx, cell_wy, cell_area, cell_weight,
            tab.gamma, tab.epsilon, tab.g_upper, tab.cg, tab.Q,
            tab.z0, tab.dz, *tab.as_arrays(),
            lam2, delta, 1 if want_diag else 0)
    return numpy_backend.energy_gradient(
        v, cells, cell_y, wx, cell_wy, cell_area, cell_weight,
        tab, lam2, delta, want_diag=want_diag, ordered_sum=ordered_sum)
