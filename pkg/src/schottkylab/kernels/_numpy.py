"""Pure-numpy versions of the reflection kernels, vectorised over points.

Same signatures and ball encoding as ``_numba``.
"""

import numpy as np

LANDED = 0
CAPPED = 1
CENTER_HIT = 2


def _containing(x, inf, kinds, centers, radii, tol):
    npts = x.shape[0]
    m = kinds.shape[0]
    hit = np.zeros((npts, m), dtype=bool)
    for j in range(m):
        k = kinds[j]
        if k == 2:
            off = radii[j]
            s = x @ centers[j]
            hit[:, j] = ~inf & (s < off - tol * max(1.0, abs(off)))
            continue
        d2 = ((x - centers[j]) ** 2).sum(axis=1)
        if k == 0:
            lim = radii[j] * (1.0 - tol)
            hit[:, j] = ~inf & (d2 < lim * lim)
        else:
            lim = radii[j] * (1.0 + tol)
            hit[:, j] = inf | (d2 > lim * lim)
    first = np.argmax(hit, axis=1)
    return np.where(hit.any(axis=1), first, -1)


def _reflect(x, inf, letters, kinds, centers, radii):
    """Reflect each row x[i] in ball ``letters[i]``; returns new (x, inf)."""
    x = x.copy()
    inf = inf.copy()
    c = centers[letters]
    r = radii[letters]
    plane = kinds[letters] == 2

    if plane.any():
        s = 2.0 * ((x[plane] * c[plane]).sum(axis=1) - r[plane])
        x[plane] -= s[:, None] * c[plane]

    sph = ~plane
    to_center = sph & inf
    x[to_center] = c[to_center]
    inf[to_center] = False

    fin = sph & ~to_center
    diff = x[fin] - c[fin]
    d2 = (diff ** 2).sum(axis=1)
    zero = d2 == 0.0
    safe = np.where(zero, 1.0, d2)
    xf = c[fin] + (r[fin] ** 2 / safe)[:, None] * diff
    xf[zero] = 0.0
    x[fin] = xf
    idx = np.nonzero(fin)[0]
    inf[idx[zero]] = True
    return x, inf


def unfold_points(coords, is_inf, kinds, centers, radii, max_depth, tol):
    npts = coords.shape[0]
    words = np.full((npts, max(max_depth, 1)), -1, np.int64)
    lengths = np.zeros(npts, np.int64)
    x = coords.astype(np.float64, copy=True)
    inf = is_inf.astype(bool, copy=True)
    status = np.zeros(npts, np.int8)
    ball = np.full(npts, -1, np.int64)
    active = np.arange(npts)

    for k in range(max_depth + 1):
        if active.size == 0:
            break
        j = _containing(x[active], inf[active], kinds, centers, radii, tol)
        keep = j >= 0
        active, j = active[keep], j[keep]
        if active.size == 0:
            break
        if k == max_depth:
            status[active] = CAPPED
            ball[active] = j
            break
        xs = x[active]
        at_center = (kinds[j] != 2) & ~inf[active] & (((xs - centers[j]) ** 2).sum(axis=1) == 0.0)
        if at_center.any():
            status[active[at_center]] = CENTER_HIT
            ball[active[at_center]] = j[at_center]
            active, j = active[~at_center], j[~at_center]
        x[active], inf[active] = _reflect(x[active], inf[active], j, kinds, centers, radii)
        words[active, k] = j
        lengths[active] = k + 1
    return words, lengths, x, inf, status, ball


def apply_words(coords, is_inf, words, lengths, kinds, centers, radii):
    """Apply word (j1..jk) as g_j1 o ... o g_jk, i.e. last letter first."""
    x = coords.astype(np.float64, copy=True)
    inf = is_inf.astype(bool, copy=True)
    if lengths.size == 0:
        return x, inf
    for t in range(int(lengths.max()) - 1, -1, -1):
        rows = np.nonzero(lengths > t)[0]
        if rows.size == 0:
            continue
        x[rows], inf[rows] = _reflect(x[rows], inf[rows], words[rows, t], kinds, centers, radii)
    return x, inf
