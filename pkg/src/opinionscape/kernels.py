"""Hot-loop kernels, compiled when available.

The compiled module is used unless it failed to build or
``OPINIONSCAPE_PURE=1`` is set in the environment. ``BACKEND`` names the
active implementation; ``fallback`` and ``compiled`` expose both for
benchmarks and cross-checks (``compiled`` is None when absent).
"""

from __future__ import annotations

import os

from . import _fallback as fallback

try:
    from . import _kernels as compiled
except ImportError:  # extension not built
    compiled = None

if compiled is not None and os.environ.get("OPINIONSCAPE_PURE", "") not in ("1", "true", "yes"):
    _impl = compiled
    BACKEND = "compiled"
else:
    _impl = fallback
    BACKEND = "python"

expand_pairs = _impl.expand_pairs
core_numbers = _impl.core_numbers
local_moving = _impl.local_moving
deviation_norms = _impl.deviation_norms

__all__ = [
    "BACKEND",
    "compiled",
    "fallback",
    "expand_pairs",
    "core_numbers",
    "local_moving",
    "deviation_norms",
]
