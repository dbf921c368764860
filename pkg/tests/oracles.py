"""Reference computations that avoid the package's own code paths.

Planar inversion is done with complex numbers, word counts by brute force,
circles through exact three-point formulas, and linear dilatation through
the eigenvalues of M^T M.
"""

import itertools
import math

import numpy as np


def invert_complex(c, r, z):
    """Inversion in the circle |z - c| = r as z -> c + r^2 / conj(z - c)."""
    c = complex(*c)
    w = complex(*z) - c
    out = c + r * r / w.conjugate()
    return np.array([out.real, out.imag])


def word_complex(circles, z):
    """Apply circles[0] o ... o circles[-1] to z, one complex inversion at a time."""
    for c, r in reversed(circles):
        z = invert_complex(c, r, z)
    return z


def reduced_words_brute(m, k):
    return [w for w in itertools.product(range(m), repeat=k) if all(a != b for a, b in zip(w, w[1:]))]


def circumcircle(p1, p2, p3):
    """Circle through three planar points (center, radius)."""
    ax, ay = p1
    bx, by = p2
    cx, cy = p3
    d = 2 * (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by))
    ux = ((ax * ax + ay * ay) * (by - cy) + (bx * bx + by * by) * (cy - ay) + (cx * cx + cy * cy) * (ay - by)) / d
    uy = ((ax * ax + ay * ay) * (cx - bx) + (bx * bx + by * by) * (ax - cx) + (cx * cx + cy * cy) * (bx - ax)) / d
    return np.array([ux, uy]), math.hypot(ax - ux, ay - uy)


def dilatation_eig(m):
    ev = np.linalg.eigvalsh(np.asarray(m, float).T @ np.asarray(m, float))
    return math.sqrt(ev[-1] / ev[0])


def ellipse_minimax_residual(a, b, grid=200001):
    """min over R of max |rho(theta) - R| / R for an origin-centered ellipse.

    rho ranges over [b, a]; scan R directly instead of solving.
    """
    R = np.linspace(b, a, grid)
    return float(np.min(np.maximum(a - R, R - b) / R))


def chordal(x, y):
    x, y = np.asarray(x, float), np.asarray(y, float)
    return 2 * np.linalg.norm(x - y) / math.sqrt((1 + x @ x) * (1 + y @ y))


def unfold_loop(balls, x, max_depth):
    """Plain loop version of unfolding for round interior balls (center, r)."""
    x = np.asarray(x, float)
    word = []
    for _ in range(max_depth):
        hit = [j for j, (c, r) in enumerate(balls) if np.linalg.norm(x - c) < r * (1 - 1e-12)]
        if not hit:
            return tuple(word), x, True
        j = hit[0]
        c, r = balls[j]
        d = x - c
        x = c + r * r * d / (d @ d)
        word.append(j)
    hit = [j for j, (c, r) in enumerate(balls) if np.linalg.norm(x - c) < r * (1 - 1e-12)]
    return tuple(word), x, not hit


def random_disks(rng, m, lo=0.08, hi=0.3, box=2.0, gap=0.05, tries=10000):
    """m disjoint disks with radii in [lo, hi] inside [-box, box]^2."""
    centers, radii = [], []
    for _ in range(tries):
        if len(centers) == m:
            break
        c = rng.uniform(-box, box, 2)
        r = rng.uniform(lo, hi)
        if all(np.linalg.norm(c - c2) > r + r2 + gap for c2, r2 in zip(centers, radii)):
            centers.append(c)
            radii.append(r)
    if len(centers) < m:
        raise RuntimeError("could not place disks")
    return np.array(centers), np.array(radii)
