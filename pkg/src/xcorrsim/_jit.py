"""Numba switch.

Hot kernels are written in the numba-compatible subset of Python and wrapped
with :func:`njit`. Setting ``XCORRSIM_NO_JIT=1`` leaves them as plain
Python/numpy functions, which is slow but handy for debugging and for the
benchmark that compares the two paths.
"""

import os

_FALSEY = {"", "0", "false", "no", "off"}

JIT_ENABLED = os.environ.get("XCORRSIM_NO_JIT", "0").strip().lower() in _FALSEY

if JIT_ENABLED:
    try:
        import numba
    except ImportError:  # pragma: no cover
        JIT_ENABLED = False

numba_default = {
    "nogil": True,
    "cache": True,
    "fastmath": False,
    "boundscheck": False,
    "error_model": "numpy",
}


def njit(fn=None, **kwargs):
    """``numba.njit`` with project defaults, or the identity when JIT is off."""
    opts = dict(numba_default)
    opts.update(kwargs)

    def wrap(f):
        if not JIT_ENABLED:
            return f
        return numba.njit(**opts)(f)

    if fn is None:
        return wrap
    return wrap(fn)
