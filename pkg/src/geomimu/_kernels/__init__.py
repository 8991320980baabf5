"""Kernel selection: compiled extension when available, numpy otherwise.

Set ``GEOMIMU_PURE=1`` to force the numpy versions even when the extension
built; useful for benchmarking and for debugging suspected kernel issues.
"""

import os

from . import fallback

HAVE_EXT = False
if os.environ.get("GEOMIMU_PURE", "") not in ("1", "true", "yes"):
    try:
        from . import _core  # type: ignore[attr-defined]

        HAVE_EXT = True
    except ImportError:
        _core = None
else:
    _core = None

if HAVE_EXT:
    nearest_codes = _core.nearest_codes
    lbs_transform = _core.lbs_transform
    BACKEND = "compiled"
else:
    nearest_codes = fallback.nearest_codes
    lbs_transform = fallback.lbs_transform
    BACKEND = "numpy"

__all__ = ["nearest_codes", "lbs_transform", "HAVE_EXT", "BACKEND", "fallback"]
