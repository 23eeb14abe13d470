"""Hot numeric kernels with selectable backend.

``mousetrail.kernels`` re-exports the kernel set from the numba backend
when numba is available and ``MOUSETRAIL_NO_NUMBA`` is unset, otherwise
from the pure-numpy fallback.  Both backend modules stay importable for
side-by-side testing and benchmarking.
"""

from __future__ import annotations

from mousetrail._accel import NUMBA_ENABLED, backend_name
from mousetrail.kernels import _numpy

if NUMBA_ENABLED:
    from mousetrail.kernels import _numba as _active
else:
    _active = _numpy

LEAF = _numpy.LEAF

rolling_drag_counts = _active.rolling_drag_counts
pairwise_mean_cosine = _active.pairwise_mean_cosine
pairwise_sqdist = _active.pairwise_sqdist
grow_tree_gini = _active.grow_tree_gini
grow_tree_mse = _active.grow_tree_mse
tree_apply = _active.tree_apply

__all__ = [
    "LEAF",
    "NUMBA_ENABLED",
    "backend_name",
    "rolling_drag_counts",
    "pairwise_mean_cosine",
    "pairwise_sqdist",
    "grow_tree_gini",
    "grow_tree_mse",
    "tree_apply",
]
