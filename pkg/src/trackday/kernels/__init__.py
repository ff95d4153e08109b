"""Hot-loop kernels with backend selection at import time.

The compiled extension (``trackday.kernels._core``) is preferred when it
built successfully; otherwise the pure-Python fallback is used. Set the
environment variable ``TRACKDAY_KERNELS`` to ``compiled`` or ``pure`` to
force a backend (``compiled`` raises if the extension is unavailable).
Both backends are arithmetic-identical; ``benchmarks/bench_kernels.py``
compares their throughput.
"""

import os

_requested = os.environ.get("TRACKDAY_KERNELS", "").strip().lower()

if _requested == "pure":
    from . import _pure as _impl

    BACKEND = "pure"
elif _requested in ("", "compiled"):
    try:
        from . import _core as _impl  # type: ignore[attr-defined]

        BACKEND = "compiled"
    except ImportError:
        if _requested == "compiled":
            raise
        from . import _pure as _impl

        BACKEND = "pure"
else:
    raise ValueError(f"TRACKDAY_KERNELS must be 'compiled' or 'pure', got {_requested!r}")

bike_rk4 = _impl.bike_rk4
project_polyline = _impl.project_polyline

__all__ = ["BACKEND", "bike_rk4", "project_polyline"]
