"""Numba switch.

Set ``BYZCOUNT_DISABLE_NUMBA=1`` before import to run every kernel through
its pure-numpy/Python path instead of the jitted one.
"""
import os

USE_NUMBA = os.environ.get("BYZCOUNT_DISABLE_NUMBA", "").strip().lower() not in ("1", "true", "yes")

if USE_NUMBA:
    try:
        import numba
    except ImportError:  # pragma: no cover
        USE_NUMBA = False

if USE_NUMBA:
    def njit(*args, **kwargs):
        kwargs.setdefault("cache", True)
        return numba.njit(*args, **kwargs)
else:
    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda fn: fn
