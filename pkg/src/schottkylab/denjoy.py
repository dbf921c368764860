"""Denjoy-type constructions on the circle and round wandering disks on tori.

The circle construction blows up a finite stretch of an irrational rotation
orbit into intervals and builds a piecewise-affine homeomorphism that maps
each inserted interval onto the next one. The torus side places round disks
along a translation orbit and checks the two obstructions to such disks
being wandering domains of a C^1 map: a single similarity cannot carry every
disk onto the next one unless radii are constant, and constant radii run out
of room.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Callable

import numpy as np

from .moebius import Ball, Sphere
from .schottky import SchottkySet

RATIONAL_MAX_DEN = 10 ** 6
RATIONAL_TOL = 1e-14
FIT_TOL = 1e-9
WITNESS_THRESHOLD = 1e-3


class ConstructionError(ValueError):
    pass


# -- torus chart and translations -------------------------------------------

def wrap(x):
    """Representative in [0, 1)^n of x mod Z^n."""
    y = np.mod(np.asarray(x, dtype=np.float64), 1.0)
    return np.where(y >= 1.0, 0.0, y)


def wrap_signed(d):
    """Representative of d mod Z^n in [-1/2, 1/2)^n."""
    d = np.asarray(d, dtype=np.float64)
    return d - np.floor(d + 0.5)


def torus_distance(a, b) -> np.ndarray:
    return np.linalg.norm(wrap_signed(np.asarray(a) - np.asarray(b)), axis=-1)


def rational_approximation(x: float, max_den: int = RATIONAL_MAX_DEN) -> Fraction:
    """Best rational approximation with denominator <= max_den (continued fractions)."""
    return Fraction(x).limit_denominator(max_den)


def is_irrational_surrogate(x: float, max_den: int = RATIONAL_MAX_DEN, tol: float = RATIONAL_TOL) -> bool:
    """False when x is within ``tol`` of a fraction with denominator <= max_den."""
    q = rational_approximation(x, max_den)
    return abs(x - float(q)) > tol * max(1.0, abs(x))


def is_minimal_surrogate(rho, max_den: int = RATIONAL_MAX_DEN, relation_bound: int = 12) -> bool:
    """Rational independence of 1, rho_1, ..., rho_n, as far as floats can tell.

    Each coordinate and each pairwise ratio must pass the continued-fraction
    test, and no integer relation k0 + k.rho = 0 with |k_i| <= relation_bound
    may hold to 1e-12.
    """
    rho = np.atleast_1d(np.asarray(rho, dtype=np.float64))
    if not all(is_irrational_surrogate(float(r), max_den) for r in rho):
        return False
    for a, b in itertools.combinations(rho, 2):
        if not is_irrational_surrogate(float(a / b), max_den):
            return False
    if rho.size >= 2:
        rng = range(-relation_bound, relation_bound + 1)
        for k in itertools.product(rng, repeat=rho.size):
            if not any(k):
                continue
            v = float(np.dot(k, rho))
            if abs(v - round(v)) < 1e-12:
                return False
    return True


@dataclass(frozen=True)
class MinimalTranslation:
    rho: np.ndarray

    def __post_init__(self):
        rho = np.atleast_1d(np.asarray(self.rho, dtype=np.float64))
        object.__setattr__(self, "rho", rho)

    @property
    def minimal(self) -> bool:
        return is_minimal_surrogate(self.rho)

    def __call__(self, x):
        return wrap(np.asarray(x) + self.rho)

    def orbit(self, p0, ks):
        ks = np.asarray(ks)
        return wrap(np.asarray(p0, dtype=np.float64) + ks[:, None] * self.rho)


def discrepancy(rho, K: int, bins: int = 64) -> float:
    """Star discrepancy of {k rho mod 1 : 1 <= k <= K}, estimated on a bins^n grid of boxes."""
    if K < 1:
        raise ValueError("K must be >= 1")
    rho = np.atleast_1d(np.asarray(rho, dtype=np.float64))
    n = rho.size
    pts = wrap(np.arange(1, K + 1)[:, None] * rho)
    idx = np.minimum((pts * bins).astype(np.int64), bins - 1)
    counts = np.zeros((bins,) * n)
    np.add.at(counts, tuple(idx.T), 1.0)
    for ax in range(n):
        counts = np.cumsum(counts, axis=ax)
    u = np.arange(1, bins + 1) / bins
    vol = u
    for _ in range(n - 1):
        vol = np.multiply.outer(vol, u)
    est = float(np.abs(counts / K - vol).max())
    # any point set has star discrepancy >= 1/(2K) (already in the first coordinate)
    return min(1.0, max(est, 1.0 / (2 * K)))


# -- Denjoy circle ------------------------------------------------------------

def geometric_weights(ks):
    return 2.0 ** (-np.abs(ks) - 2.0)


def inverse_square_weights(ks):
    return (np.abs(ks) + 2.0) ** -2


WEIGHT_RULES = {
    "geometric": geometric_weights,
    "inverse_square": inverse_square_weights,
    "zero": lambda ks: np.zeros(np.shape(ks)),
}


def _weights(rule, N):
    fn = WEIGHT_RULES[rule] if isinstance(rule, str) else rule
    ks = np.arange(-N, N + 1)
    w = np.asarray(fn(ks), dtype=np.float64)
    if np.all(w == 0):
        return ks, w
    if not np.all(np.isfinite(w)) or np.any(w <= 0):
        raise ConstructionError("weights must be positive and finite")
    far = np.arange(N + 1, 8 * N + 9)
    tail = float(np.sum(fn(far)) + np.sum(fn(-far)))
    if tail > 0.5 * w.sum():
        raise ConstructionError(f"weights look non-summable: mass on {N} < |k| <= {8 * N + 8} is {tail:.3g}")
    return ks, w


@dataclass
class DenjoyCircle:
    alpha: float
    ks: np.ndarray
    lengths: np.ndarray        # inserted interval lengths, aligned with ks
    normalization: float
    starts: np.ndarray         # left ends of the inserted intervals
    X: np.ndarray              # sorted domain breakpoints
    Y: np.ndarray              # lifted images of X (non-decreasing)
    artifacts: list = field(default_factory=list)   # domain pieces [a, b) near the truncation
    closing_interval: tuple = (0.0, 0.0)             # image of the last interval

    @property
    def N(self):
        return int(self.ks.max())

    @property
    def inserted(self) -> float:
        return float(self.lengths.sum())

    @property
    def degenerate(self) -> bool:
        return self.inserted == 0.0

    def interval(self, k):
        i = int(k + self.N)
        return float(self.starts[i]), float(self.starts[i] + self.lengths[i])

    def f(self, s):
        s = wrap(s)
        if self.degenerate:
            return wrap(s + self.alpha)
        Xe = np.append(self.X, self.X[0] + 1.0)
        Ye = np.append(self.Y, self.Y[0] + 1.0)
        s2 = np.where(s < self.X[0], s + 1.0, s)
        return wrap(np.interp(s2, Xe, Ye))

    def h(self, s):
        """Collapse map onto the rotation circle; constant on each inserted interval."""
        s = wrap(s)
        if self.degenerate:
            return s
        covered = np.clip(np.subtract.outer(s, self.starts), 0.0, self.lengths).sum(axis=-1)
        return wrap((s - covered) / (1.0 - self.inserted))

    def embed(self, theta):
        """Blow-up position of a rotation-circle point that is not an inserted orbit point."""
        theta = wrap(theta)
        orbit = wrap(self.ks * self.alpha)
        before = (np.less.outer(orbit, theta) * self.lengths[:, None]).sum(axis=0)
        return (1.0 - self.inserted) * theta + before

    def in_artifact(self, s) -> np.ndarray:
        s = wrap(s)
        out = np.zeros(np.shape(s), dtype=bool)
        for a, b in self.artifacts:
            out |= (s >= a) & (s < b) if a <= b else (s >= a) | (s < b)
        return out


def _cyclic_lift(Y):
    Y = np.array(Y, dtype=np.float64)
    Y[0] = wrap(Y[0])
    for i in range(1, Y.size):
        Y[i] = Y[i] - math.floor(Y[i] - Y[i - 1])
    return Y


def build_denjoy_circle(alpha: float, weights="geometric", N: int = 20, total: float | None = None) -> DenjoyCircle:
    """Blow up the orbit points {k alpha}, |k| <= N, into intervals.

    ``weights`` names a rule in WEIGHT_RULES or is a callable of the integer
    array k. With ``total`` the lengths are rescaled to sum to it; otherwise
    the weights are the lengths and must sum to less than 1.
    """
    if not is_irrational_surrogate(alpha):
        raise ConstructionError(f"alpha={alpha!r} is too close to a rational with denominator <= {RATIONAL_MAX_DEN}")
    if N < 1:
        raise ConstructionError("N must be >= 1")
    ks, w = _weights(weights, N)
    theta = wrap(ks * alpha)
    if np.all(w == 0):
        return DenjoyCircle(alpha, ks, w, 1.0, theta.copy(), np.sort(theta), np.sort(theta))
    c = 1.0 if total is None else total / w.sum()
    ell = c * w
    L = float(ell.sum())
    if not L < 1.0:
        raise ConstructionError(f"inserted intervals overlap: total length {L:.6g} >= 1")

    order = np.argsort(theta, kind="stable")
    before = np.zeros_like(ell)
    before[order] = np.concatenate([[0.0], np.cumsum(ell[order])[:-1]])
    starts = (1.0 - L) * theta + before
    ends = starts + ell
    idx = {int(k): i for i, k in enumerate(ks)}

    # image of I_N: a short interval J centered at the blow-up position of {(N+1) alpha}
    th_next = float(wrap((N + 1) * alpha))
    s_next = (1.0 - L) * th_next + float(ell[theta < th_next].sum())
    left = float(np.max(np.where(ends <= s_next, ends, ends - 1.0)))
    right = float(np.min(np.where(starts >= s_next, starts, starts + 1.0)))
    half = min(ell[idx[N]] / 2.0, 0.25 * min(s_next - left, right - s_next))
    J = (s_next - half, s_next + half)

    X, Y = [], []
    for i in order:
        k = int(ks[i])
        X += [starts[i], ends[i]]
        if k < N:
            j = idx[k + 1]
            Y += [starts[j], ends[j]]
        else:
            Y += [J[0], J[1]]
    X = np.asarray(X)
    Y = _cyclic_lift(Y)
    if not Y[-1] < Y[0] + 1.0:
        raise ConstructionError("image breakpoints do not wind once around the circle")

    # pieces where h o f = R o h cannot hold: I_N, the gaps on either side of
    # it, and the gap whose image swallows I_{-N}
    pos = {int(ks[i]): p for p, i in enumerate(order)}
    m = len(order)
    pN = pos[N]
    art = [(starts[idx[N]], ends[idx[N]])]
    prev_end = ends[order[(pN - 1) % m]]
    next_start = starts[order[(pN + 1) % m]]
    art.append((float(prev_end), float(starts[idx[N]])))
    art.append((float(ends[idx[N]]), float(next_start)))
    th_pre = float(wrap((-N - 1) * alpha))
    for p in range(m):
        a_i, b_i = order[p], order[(p + 1) % m]
        lo, hi = theta[a_i], theta[b_i]
        inside = (lo < th_pre < hi) if lo < hi else (th_pre > lo or th_pre < hi)
        if inside:
            art.append((float(ends[a_i]), float(starts[b_i])))
    return DenjoyCircle(alpha, ks, ell, c, starts, X, Y, [(float(a), float(b)) for a, b in art], J)


def circle_distance(a, b):
    return np.abs(wrap_signed(np.asarray(a) - np.asarray(b)))


def semiconjugacy_defect(dc: DenjoyCircle, grid: int = 10 ** 4, exclude_artifacts: bool = True) -> float:
    """max over a grid of the circle distance between h(f(s)) and h(s) + alpha."""
    s = np.arange(grid) / grid
    if exclude_artifacts:
        s = s[~dc.in_artifact(s)]
    lhs = dc.h(dc.f(s))
    rhs = wrap(dc.h(s) + dc.alpha)
    return float(circle_distance(lhs, rhs).max()) if s.size else 0.0


def corrupt_breakpoint(dc: DenjoyCircle, index: int, delta: float) -> DenjoyCircle:
    """Copy with one image breakpoint moved (negative control)."""
    Y = dc.Y.copy()
    Y[index] += delta
    return replace(dc, Y=Y)


@dataclass
class WanderingReport:
    returns: list              # iterates m with f^m(I_0) meeting I_0
    horizon: int

    @property
    def wandering(self) -> bool:
        return not self.returns


def wandering_check(dc: DenjoyCircle, horizon: int | None = None, tol: float = 1e-12) -> WanderingReport:
    """Does f^m(I_0) meet the interior of I_0 for some 1 <= m <= horizon?"""
    horizon = 2 * dc.N if horizon is None else horizon
    a0, b0 = dc.interval(0)
    a, length = a0, b0 - a0
    hits = []
    for m in range(1, horizon + 1):
        fa, fb = float(dc.f(a)), float(dc.f(a + length))
        a, length = fa, float(wrap(fb - fa)) if fb != fa else 0.0
        # open-interval overlap on the circle
        rel = float(wrap(a - a0))
        if rel < (b0 - a0) - tol or rel + length > 1.0 + tol:
            hits.append(m)
    return WanderingReport(hits, horizon)


# -- round disks on the torus ------------------------------------------------

def unit_ball_volume(n: int) -> float:
    return math.pi ** (n / 2) / math.gamma(n / 2 + 1)


def radius_rule(rule, ks):
    if callable(rule):
        return np.asarray(rule(ks), dtype=np.float64)
    if isinstance(rule, str):
        if rule == "decreasing":
            return 0.05 / (np.abs(ks) + 2.0)
        raise ConstructionError(f"unknown radius rule {rule!r}")
    return np.full(np.shape(ks), float(rule))


@dataclass
class RoundDomainScene:
    rho: np.ndarray
    p0: np.ndarray
    N: int
    radii: np.ndarray          # disk k = 0..N
    centers: np.ndarray        # wrapped centers psi(p0 + k rho)
    shrink_count: int = 0
    gap: float = 1e-6

    @property
    def dim(self):
        return self.rho.size

    @property
    def ks(self):
        return np.arange(self.N + 1)

    def total_volume(self) -> float:
        return float(unit_ball_volume(self.dim) * np.sum(self.radii ** self.dim))

    def min_gap(self) -> float:
        d = torus_distance(self.centers[:, None, :], self.centers[None, :, :])
        g = d - self.radii[:, None] - self.radii[None, :]
        np.fill_diagonal(g, np.inf)
        self_gap = 1.0 - 2.0 * self.radii
        return float(min(g.min(), self_gap.min()))

    def lifted_set(self, label=None) -> SchottkySet:
        """Removed balls of the lifted set that meet the closed unit cube."""
        balls = []
        for shift in itertools.product((-1, 0, 1), repeat=self.dim):
            for c, r in zip(self.centers + np.array(shift), self.radii):
                if np.all(c > -r) and np.all(c < 1 + r):
                    balls.append(Ball(Sphere(c, r)))
        return SchottkySet(tuple(balls), label)


def build_round_scene(rho, p0, N: int, rule="decreasing", gap: float = 1e-6,
                      check_minimal: bool = True) -> RoundDomainScene:
    """Disks at psi(p0 + k rho), k = 0..N, shrunk greedily until disjoint."""
    rho = np.atleast_1d(np.asarray(rho, dtype=np.float64))
    p0 = np.broadcast_to(np.asarray(p0, dtype=np.float64), rho.shape).copy()
    if check_minimal and not is_minimal_surrogate(rho):
        raise ConstructionError(f"translation {rho.tolist()} fails the minimality surrogate")
    if N < 1:
        raise ConstructionError("N must be >= 1")
    ks = np.arange(N + 1)
    r = radius_rule(rule, ks)
    if np.any(r <= 0) or not np.all(np.isfinite(r)):
        raise ConstructionError("radii must be positive")
    vol = unit_ball_volume(rho.size) * float(np.sum(r ** rho.size))
    if not vol < 1.0:
        raise ConstructionError(f"disk volumes sum to {vol:.6g} >= 1, the volume of the torus")
    centers = wrap(p0 + ks[:, None] * rho)
    d = torus_distance(centers[:, None, :], centers[None, :, :])
    shrinks = 0
    changed = True
    while changed:
        changed = False
        for j in ks:
            if 2 * r[j] + gap > 1.0:
                r[j] *= 0.9
                shrinks += 1
                changed = True
            for k in range(j + 1, N + 1):
                if r[j] + r[k] + gap > d[j, k]:
                    r[j] *= 0.9
                    r[k] *= 0.9
                    shrinks += 1
                    changed = True
    return RoundDomainScene(rho, p0, N, r, centers, shrinks, gap)


# -- obstructions -------------------------------------------------------------

@dataclass
class SimilarityFit:
    scale: float
    rotation: np.ndarray
    translation: np.ndarray
    center_residual: float
    radius_residual: float

    @property
    def residual(self):
        return max(self.center_residual, self.radius_residual)


def fit_similarity(src_c, src_r, dst_c, dst_r) -> SimilarityFit:
    """Least-squares x -> s T x + a (T orthogonal, s > 0) taking balls to balls."""
    X, Y = np.asarray(src_c, float), np.asarray(dst_c, float)
    r, q = np.asarray(src_r, float), np.asarray(dst_r, float)
    xm, ym = X.mean(axis=0), Y.mean(axis=0)
    Xc, Yc = X - xm, Y - ym
    U, _, Vt = np.linalg.svd(Yc.T @ Xc)
    T = U @ Vt
    num = float(np.sum((Xc @ T.T) * Yc) + r @ q)
    den = float(np.sum(Xc ** 2) + r @ r)
    s = num / den
    a = ym - s * T @ xm
    cres = float(np.linalg.norm(s * X @ T.T + a - Y, axis=1).max())
    rres = float(np.abs(s * r - q).max())
    return SimilarityFit(s, T, a, cres, rres)


@dataclass
class IsometryReport:
    fit: SimilarityFit
    verdict: str

    def as_dict(self):
        f = self.fit
        return {
            "verdict": self.verdict,
            "scale": f.scale,
            "rotation": f.rotation.tolist(),
            "translation": f.translation.tolist(),
            "center_residual": f.center_residual,
            "radius_residual": f.radius_residual,
            "residual": f.residual,
        }


def chain_lifts(centers) -> np.ndarray:
    """Lift a chain of torus points by minimal-image steps from the first one."""
    c = np.asarray(centers, dtype=np.float64)
    steps = wrap_signed(np.diff(c, axis=0))
    return np.concatenate([c[:1], c[:1] + np.cumsum(steps, axis=0)])


def isometry_forcing_check(scene, fit_tol: float = FIT_TOL,
                           witness: float = WITNESS_THRESHOLD) -> IsometryReport:
    """Fit one similarity sending every disk D_k onto D_{k+1}.

    ``scene`` is a RoundDomainScene (centers are re-lifted along the chain)
    or a ``(centers, radii)`` pair of already-lifted data.
    """
    if isinstance(scene, RoundDomainScene):
        centers, radii = chain_lifts(scene.centers), scene.radii
    else:
        centers, radii = (np.asarray(a, dtype=np.float64) for a in scene)
    if len(radii) < 3:
        raise ConstructionError("need at least two disk-to-disk transitions (N >= 2)")
    fit = fit_similarity(centers[:-1], radii[:-1], centers[1:], radii[1:])
    if fit.residual <= fit_tol:
        verdict = "ISOMETRY" if abs(fit.scale - 1.0) <= fit_tol else "SIMILARITY"
    elif fit.residual >= witness:
        verdict = "THEOREM WITNESS"
    else:
        verdict = "INCONCLUSIVE"
    return IsometryReport(fit, verdict)


def similarity_chain(c0, r0, scale, rotation, translation, N):
    """Balls B_{k+1} = S(B_k) under x -> scale*rotation*x + translation."""
    c = [np.asarray(c0, dtype=np.float64)]
    r = [float(r0)]
    T = np.asarray(rotation, dtype=np.float64)
    for _ in range(N):
        c.append(scale * T @ c[-1] + translation)
        r.append(scale * r[-1])
    return np.array(c), np.array(r)


@dataclass
class VolumeVerdict:
    n: int
    radius: float
    volume: float
    n_max: float               # int, or inf for radius 0
    demanded: int | None
    verdict: str               # CONTRADICTION | FITS | BOUND

    def as_dict(self):
        return {
            "n": self.n, "radius": self.radius, "volume": self.volume,
            "n_max": self.n_max if math.isinf(self.n_max) else int(self.n_max),
            "demanded": self.demanded, "verdict": self.verdict,
        }


def volume_obstruction(n: int, r: float, volume: float = 1.0, demanded: int | None = None) -> VolumeVerdict:
    """Largest number of disjoint radius-r balls the volume allows."""
    if r == 0:
        n_max = math.inf
    else:
        n_max = math.floor(volume / (unit_ball_volume(n) * r ** n))
    if demanded is None:
        verdict = "BOUND"
    else:
        verdict = "CONTRADICTION" if demanded > n_max else "FITS"
    return VolumeVerdict(n, float(r), float(volume), n_max, demanded, verdict)


def scene_volume_obstruction(scene: RoundDomainScene) -> VolumeVerdict:
    """Volume check for a scene whose disks all keep the first disk's radius."""
    return volume_obstruction(scene.dim, float(scene.radii[0]), 1.0, int(scene.N + 1))
