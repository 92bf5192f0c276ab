"""Select the gridding backend at import time.

The compiled extension is used when it imports cleanly; otherwise (or when
``KIS_PURE_PYTHON=1``) the numpy fallback is used. ``BACKEND`` names the
active choice.
"""

import os

from . import _gridding_py

if os.environ.get("KIS_PURE_PYTHON", "") in {"1", "true", "yes"}:
    _impl = _gridding_py
    BACKEND = "python"
else:
    try:
        from . import _gridding as _impl

        BACKEND = "compiled"
    except ImportError:
        _impl = _gridding_py
        BACKEND = "python"

spread = _impl.spread
gather = _impl.gather


def thread_cap():
    """Maximum worker threads, from ``KIS_THREADS`` (default: CPU count)."""
    raw = os.environ.get("KIS_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            pass
    return os.cpu_count() or 1
