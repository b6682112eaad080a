"""Numerical kernel backends.

The hot loops (backward Volterra sweeps, binomial-tree value iteration,
Monte Carlo path simulation) exist twice: a Cython extension and a pure
numpy fallback with identical call signatures and, for the tree and Monte
Carlo kernels, identical floating-point semantics.  The compiled backend
is selected at import when available; set ANSCOMBE_PURE_PYTHON=1 to force
the fallback.  ``get_backend`` exposes both for benchmarks and tests.
"""

import os

from . import _fallback

_FORCE_PURE = os.environ.get("ANSCOMBE_PURE_PYTHON", "").strip() not in ("", "0")

if _FORCE_PURE:
    _impl = _fallback
    BACKEND = "fallback"
else:
    try:
        from . import _compiled as _impl

        BACKEND = "compiled"
    except ImportError:
        _impl = _fallback
        BACKEND = "fallback"


def get_backend(name: str):
    """Return a kernel module by name ('compiled' or 'fallback').

    Raises ImportError if the compiled extension was not built.
    """
    if name == "fallback":
        return _fallback
    if name == "compiled":
        from . import _compiled

        return _compiled
    raise ValueError(f"unknown backend {name!r}")


solve_symmetric_grid = _impl.solve_symmetric_grid
solve_asymmetric_grid = _impl.solve_asymmetric_grid
fixed_point_sweep = _impl.fixed_point_sweep
residual_symmetric_nodes = _impl.residual_symmetric_nodes
solve_c_grid = _impl.solve_c_grid
solve_c_grid_symmetric = _impl.solve_c_grid_symmetric
residual_c_nodes = _impl.residual_c_nodes
tree_mixture = _impl.tree_mixture
tree_abs = _impl.tree_abs
mc_chunk = _impl.mc_chunk
ou_chunk = _impl.ou_chunk
