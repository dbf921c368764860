"""Hot loops: point unfolding and word application over batches.

The numba backend is used when numba imports and ``SCHOTTKYLAB_NO_NUMBA`` is
unset (or "0"); otherwise the vectorised numpy backend is used. Both modules
stay importable so they can be compared directly (see benchmarks/).
"""

import os

from . import _numpy as numpy_impl

LANDED = 0
CAPPED = 1
CENTER_HIT = 2

# points within this relative distance of a peripheral sphere count as in the set
BOUNDARY_TOL = 1e-12

try:
    from . import _numba as numba_impl
    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover
    numba_impl = None
    NUMBA_AVAILABLE = False


def _use_numba():
    flag = os.environ.get("SCHOTTKYLAB_NO_NUMBA", "").strip().lower()
    return NUMBA_AVAILABLE and flag in ("", "0", "false", "no")


BACKEND = "numba" if _use_numba() else "numpy"
_impl = numba_impl if BACKEND == "numba" else numpy_impl


def unfold_points(coords, is_inf, kinds, centers, radii, max_depth, tol=BOUNDARY_TOL):
    """Reflect each point through containing balls until it is in none of them.

    Returns ``(words, lengths, terminals, terminal_inf, status, ball)``; row p
    of ``words`` holds the letters in the order they were applied.
    """
    return _impl.unfold_points(coords, is_inf, kinds, centers, radii, int(max_depth), float(tol))


def apply_words(coords, is_inf, words, lengths, kinds, centers, radii):
    return _impl.apply_words(coords, is_inf, words, lengths, kinds, centers, radii)


def set_threads(n: int) -> int:
    """Cap the numba worker count; returns the count in effect (1 for numpy)."""
    if BACKEND != "numba":
        return 1
    import numba

    n = max(1, min(int(n), numba.config.NUMBA_NUM_THREADS))
    numba.set_num_threads(n)
    return n
