"""Kernel backend selection.

The compiled ``_core`` extension is used when it imports; otherwise the
pure-Python ``_core_py`` module is used. Setting ``STREETDYN_PURE_PYTHON=1``
forces the fallback.
"""

import os

from . import _core_py

BACKEND = "python"
_impl = _core_py

if os.environ.get("STREETDYN_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _core as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        _impl = _core_py

bicycle_step = _impl.bicycle_step
bicycle_rollout = _impl.bicycle_rollout
segment_min_distance = _impl.segment_min_distance
obb_overlap_series = _impl.obb_overlap_series
disc_obb_overlap_series = _impl.disc_obb_overlap_series

__all__ = [
    "BACKEND",
    "bicycle_step",
    "bicycle_rollout",
    "segment_min_distance",
    "obb_overlap_series",
    "disc_obb_overlap_series",
]
