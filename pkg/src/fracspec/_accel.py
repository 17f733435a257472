"""Backend selection for the numeric inner loops.

Every hot kernel in :mod:`fracspec._kernels` exists twice: a numba
``@njit`` build and a vectorized pure-numpy build.  The choice is made
once at import time:

* numba is used when it imports cleanly and the environment variable
  ``FRACSPEC_NUMBA`` is not ``0`` / ``false`` / ``off``;
* otherwise the numpy build runs, with identical semantics.

Both builds stay importable so they can be benchmarked against each
other (see ``benchmarks/bench_kernels.py``).
"""

from __future__ import annotations

import os

_flag = os.environ.get("FRACSPEC_NUMBA", "1").strip().lower()
NUMBA_REQUESTED = _flag not in ("0", "false", "off")

try:
    import numba as _nb

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - environment dependent
    _nb = None
    HAS_NUMBA = False

NUMBA_ACTIVE = HAS_NUMBA and NUMBA_REQUESTED

# cache=True so repeated runs skip recompilation
kwd = {"cache": True, "fastmath": False}


def jit(*args, **kwargs):
    """``numba.njit`` when numba is importable, else a no-op decorator.

    The no-op path keeps the decorated python function callable as-is,
    which is what the benchmark uses to time the interpreted loop.
    """
    if HAS_NUMBA:
        return _nb.njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]

    def wrap(fn):
        return fn

    return wrap


def backend() -> str:
    """Name of the active kernel backend, ``"numba"`` or ``"numpy"``."""
    return "numba" if NUMBA_ACTIVE else "numpy"
