"""Rasterization kernel with backend selection at import.

Prefers the compiled Cython kernel; falls back to the numpy implementation
when the extension is unavailable. Set CHIRALIS_NO_NATIVE=1 to force the
fallback (useful for benchmarking and debugging).
"""

import os

from . import _zbuffer_py


def _select():
    if os.environ.get("CHIRALIS_NO_NATIVE", "") not in ("", "0"):
        return _zbuffer_py
    try:
        from . import _zbuffer_cy
        return _zbuffer_cy
    except ImportError:
        return _zbuffer_py


_impl = _select()

BACKEND = _impl.BACKEND
rasterize_depth = _impl.rasterize_depth


def available_backends() -> dict:
    """Backend name -> rasterize_depth callable, for tests and benchmarks."""
    backends = {"python": _zbuffer_py.rasterize_depth}
    try:
        from . import _zbuffer_cy
        backends["compiled"] = _zbuffer_cy.rasterize_depth
    except ImportError:
        pass
    return backends
