"""Thread-count plumbing for the kernels and BLAS."""

from __future__ import annotations

import os

_active_limiter = None


def resolve_threads(requested: int | None) -> int:
    """Requested value, else the SENSEI_THREADS env var, else all cores."""
    if requested is not None and requested >= 1:
        return requested
    env = os.environ.get("SENSEI_THREADS")
    if env:
        try:
            n = int(env)
            if n >= 1:
                return n
        except ValueError:
            pass
    return os.cpu_count() or 1


def configure_threads(requested: int | None = None) -> int:
    """Pin numba and BLAS pools to the resolved thread count; returns it.

    The count is clamped to what the numba runtime was launched with.
    """
    global _active_limiter
    n = resolve_threads(requested)

    import numba

    n = min(n, numba.config.NUMBA_NUM_THREADS)
    numba.set_num_threads(n)

    try:
        from threadpoolctl import threadpool_limits

        _active_limiter = threadpool_limits(limits=n)
    except ImportError:
        pass
    return n
