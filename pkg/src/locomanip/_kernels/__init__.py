"""Hot numerical kernels with a compiled core and a numpy fallback.

The compiled extension is used when importable. Set ``LOCOMANIP_PURE_PYTHON=1``
to force the fallback (handy for debugging and for the benchmark).
"""

import os

from . import _fallback

BACKEND = "python"
_impl = _fallback

if not os.environ.get("LOCOMANIP_PURE_PYTHON"):
    try:
        from . import _ckernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _fallback

total_reward_batch = _impl.total_reward_batch
voxel_indices = _impl.voxel_indices
chain_fk_batch = _impl.chain_fk_batch
cone_margins = _impl.cone_margins
trapezoid_defects = _impl.trapezoid_defects


def backends():
    """Return every importable implementation keyed by name."""
    found = {"python": _fallback}
    try:
        from . import _ckernels

        found["cython"] = _ckernels
    except ImportError:
        pass
    return found


__all__ = [
    "BACKEND",
    "backends",
    "chain_fk_batch",
    "cone_margins",
    "total_reward_batch",
    "trapezoid_defects",
    "voxel_indices",
]
