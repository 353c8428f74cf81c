"""Kernel dispatch: the compiled core when importable, numpy otherwise.

Set ``DDOS_HYBRID_PURE=1`` to force the pure-Python fallback.
"""

import os

from ddos_hybrid._kernels import fallback

BACKEND = "python"
_impl = fallback

if os.environ.get("DDOS_HYBRID_PURE", "") not in ("1", "true", "yes"):
    try:
        from ddos_hybrid._kernels import _core as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = fallback

pcg32_u32 = _impl.pcg32_u32
pcg32_bounded = _impl.pcg32_bounded
apply_swaps = _impl.apply_swaps
best_split = _impl.best_split
grow_tree = _impl.grow_tree
forest_votes = _impl.forest_votes
conv_gap = _impl.conv_gap
dense = _impl.dense

__all__ = [
    "BACKEND",
    "fallback",
    "pcg32_u32",
    "pcg32_bounded",
    "apply_swaps",
    "best_split",
    "grow_tree",
    "forest_votes",
    "conv_gap",
    "dense",
]
