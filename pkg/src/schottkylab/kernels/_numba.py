"""Numba versions of the per-point reflection kernels.

Ball encoding shared with ``_numpy``: ``kinds[j]`` is 0 for the inside of a
round sphere, 1 for its outside, 2 for the half-space ``normal . x < offset``.
For kinds 0/1 ``centers[j]`` / ``radii[j]`` are center and radius, for kind 2
they hold the unit normal and the offset.

The batch loops are parallel over points; each point is independent, so the
result does not depend on the thread count.
"""

import os

import numpy as np
from numba import config, njit, prange

# the system TBB is too old for numba; avoid the probe warning
if "NUMBA_THREADING_LAYER" not in os.environ:
    config.THREADING_LAYER = "workqueue"

LANDED = 0
CAPPED = 1
CENTER_HIT = 2


@njit(cache=True)
def _containing(x, inf, kinds, centers, radii, tol):
    m, n = centers.shape
    for j in range(m):
        k = kinds[j]
        if k == 2:
            if inf:
                continue
            s = 0.0
            for d in range(n):
                s += centers[j, d] * x[d]
            off = radii[j]
            if s < off - tol * max(1.0, abs(off)):
                return j
        else:
            if inf:
                if k == 1:
                    return j
                continue
            d2 = 0.0
            for d in range(n):
                t = x[d] - centers[j, d]
                d2 += t * t
            r = radii[j]
            if k == 0:
                lim = r * (1.0 - tol)
                if d2 < lim * lim:
                    return j
            else:
                lim = r * (1.0 + tol)
                if d2 > lim * lim:
                    return j
    return -1


@njit(cache=True)
def _reflect(x, inf, kind, center, radius):
    """Reflect x in place; returns the new infinity flag."""
    n = x.shape[0]
    if kind == 2:
        if inf:
            return True
        s = 0.0
        for d in range(n):
            s += center[d] * x[d]
        s = 2.0 * (s - radius)
        for d in range(n):
            x[d] -= s * center[d]
        return False
    if inf:
        for d in range(n):
            x[d] = center[d]
        return False
    d2 = 0.0
    for d in range(n):
        t = x[d] - center[d]
        d2 += t * t
    if d2 == 0.0:
        for d in range(n):
            x[d] = 0.0
        return True
    f = radius * radius / d2
    for d in range(n):
        x[d] = center[d] + f * (x[d] - center[d])
    return False


@njit(cache=True, parallel=True)
def unfold_points(coords, is_inf, kinds, centers, radii, max_depth, tol):
    npts, n = coords.shape
    words = np.full((npts, max(max_depth, 1)), -1, np.int64)
    lengths = np.zeros(npts, np.int64)
    out = coords.copy()
    out_inf = is_inf.copy()
    status = np.zeros(npts, np.int8)
    ball = np.full(npts, -1, np.int64)
    for p in prange(npts):
        x = np.empty(n)
        for d in range(n):
            x[d] = coords[p, d]
        inf = is_inf[p]
        k = 0
        while True:
            j = _containing(x, inf, kinds, centers, radii, tol)
            if j < 0:
                break
            if k == max_depth:
                status[p] = CAPPED
                ball[p] = j
                break
            if kinds[j] != 2 and not inf:
                d2 = 0.0
                for d in range(n):
                    t = x[d] - centers[j, d]
                    d2 += t * t
                if d2 == 0.0:
                    status[p] = CENTER_HIT
                    ball[p] = j
                    break
            inf = _reflect(x, inf, kinds[j], centers[j], radii[j])
            words[p, k] = j
            k += 1
        lengths[p] = k
        for d in range(n):
            out[p, d] = x[d]
        out_inf[p] = inf
    return words, lengths, out, out_inf, status, ball


@njit(cache=True, parallel=True)
def apply_words(coords, is_inf, words, lengths, kinds, centers, radii):
    """Apply word (j1..jk) as g_j1 o ... o g_jk, i.e. last letter first."""
    npts, n = coords.shape
    out = coords.copy()
    out_inf = is_inf.copy()
    for p in prange(npts):
        x = np.empty(n)
        for d in range(n):
            x[d] = coords[p, d]
        inf = is_inf[p]
        for t in range(lengths[p] - 1, -1, -1):
            j = words[p, t]
            inf = _reflect(x, inf, kinds[j], centers[j], radii[j])
        for d in range(n):
            out[p, d] = x[d]
        out_inf[p] = inf
    return out, out_inf
