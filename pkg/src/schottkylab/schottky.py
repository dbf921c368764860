"""Schottky sets, their reflection groups and orbit packings."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property
from typing import Iterator, Sequence

import numpy as np

from . import kernels
from .moebius import (
    INFINITY,
    Ball,
    GeometryError,
    Plane,
    Sphere,
    as_point,
    image_of_ball,
    join_point,
    pack_balls,
    split_points,
)

DEFAULT_DEPTH = 20
MIN_GAP = 1e-12

LANDED = "landed_in_complement"
DEPTH_CAPPED = "depth_capped"


class SchottkyError(ValueError):
    pass


class UnfoldError(SchottkyError):
    """A reflection chain hit a ball center exactly."""


@dataclass(frozen=True, eq=False)
class SchottkySet:
    """Complement of finitely many disjoint open balls (the removed balls)."""

    balls: tuple
    label: str | None = None

    def __post_init__(self):
        balls = tuple(self.balls)
        if not balls:
            raise SchottkyError("a Schottky set needs removed balls")
        dims = {b.dim for b in balls}
        if len(dims) != 1:
            raise GeometryError(f"balls of mixed dimension: {sorted(dims)}")
        object.__setattr__(self, "balls", balls)

    @classmethod
    def from_disks(cls, centers, radii, label=None):
        return cls(tuple(Ball(Sphere(c, r)) for c, r in zip(centers, radii)), label)

    @property
    def dim(self) -> int:
        return self.balls[0].dim

    def __len__(self):
        return len(self.balls)

    @cached_property
    def packed(self):
        return pack_balls(self.balls)

    @property
    def mirrors(self):
        return tuple(b.sphere for b in self.balls)

    def radii(self) -> np.ndarray:
        return np.array([b.radius for b in self.balls])


def _pair_gap(a: Ball, b: Ball) -> float:
    """Separation between the closed regions of two balls (negative = overlap)."""
    sa, sb = a.sphere, b.sphere
    if isinstance(sa, Plane) and not isinstance(sb, Plane):
        return _pair_gap(b, a)
    if isinstance(sa, Sphere) and isinstance(sb, Sphere):
        d = float(np.linalg.norm(sa.center - sb.center))
        if a.side == "interior" and b.side == "interior":
            return d - sa.radius - sb.radius
        if a.side == "exterior" and b.side == "exterior":
            return -np.inf
        inner, outer = (sa, sb) if a.side == "interior" else (sb, sa)
        return outer.radius - d - inner.radius
    if isinstance(sa, Sphere):
        # sphere ball vs half-space
        if a.side == "exterior":
            return -np.inf
        sign = 1.0 if b.side == "interior" else -1.0
        return sign * float(sb.normal @ sa.center - sb.offset) - sa.radius
    n1, o1 = (sa.normal, sa.offset) if a.side == "interior" else (-sa.normal, -sa.offset)
    n2, o2 = (sb.normal, sb.offset) if b.side == "interior" else (-sb.normal, -sb.offset)
    if np.linalg.norm(n1 + n2) > 1e-12:
        return -np.inf
    return float(-o2 - o1)


@dataclass
class ValidationReport:
    valid: bool
    ball_count: int
    min_gap: float
    margins: np.ndarray
    violations: list
    message: str

    def __bool__(self):
        return self.valid


def validate(s: SchottkySet) -> ValidationReport:
    """Check ball count and strict pairwise disjointness of the closed balls."""
    m = len(s.balls)
    margins = np.full((m, m), np.inf)
    violations = []
    for i, j in itertools.combinations(range(m), 2):
        g = _pair_gap(s.balls[i], s.balls[j])
        margins[i, j] = margins[j, i] = g
        if not g > MIN_GAP:
            violations.append((i, j, g))
    min_gap = float(margins.min()) if m > 1 else np.inf
    msgs = []
    if m < 3:
        msgs.append(f"need at least three removed balls, got {m}")
    for i, j, g in violations:
        msgs.append(f"balls {i} and {j} are not disjoint (gap {g:.6g})")
    valid = not msgs
    return ValidationReport(valid, m, min_gap, margins, violations, "; ".join(msgs) or "ok")


def require_valid(s: SchottkySet) -> SchottkySet:
    rep = validate(s)
    if not rep.valid:
        raise SchottkyError(rep.message)
    return s


# -- words ------------------------------------------------------------------

def word_count(m: int, k: int) -> int:
    """Number of reduced words of length exactly k on m involutions."""
    return 1 if k == 0 else m * (m - 1) ** (k - 1)


def is_reduced(word: Sequence[int]) -> bool:
    return all(a != b for a, b in zip(word, word[1:]))


def enumerate_words(m: int, max_len: int) -> Iterator[tuple]:
    """All reduced words of length <= max_len, by length then lexicographically."""
    if m < 2:
        raise ValueError("need at least two generators")
    level = [()]
    yield ()
    for _ in range(max_len):
        nxt = []
        for w in level:
            for a in range(m):
                if not w or w[-1] != a:
                    nxt.append(w + (a,))
        for w in nxt:
            yield w
        level = nxt


@dataclass(frozen=True)
class OrbitBall:
    word: tuple
    source: int
    ball: Ball
    depth: int

    @property
    def parent(self):
        """(word, source) of the orbit ball one level up that contains this one."""
        if not self.word:
            return None
        return self.word[:-1], self.word[-1]


def orbit_packing(s: SchottkySet, depth: int) -> list[OrbitBall]:
    """Balls g_w(B_j) for reduced w with |w| <= depth and j != last(w).

    Ordered by depth, then (word, source) lexicographically.
    """
    if depth < 0:
        raise ValueError("depth must be >= 0")
    mirrors = s.mirrors
    level = [OrbitBall((), j, b, 0) for j, b in enumerate(s.balls)]
    out = list(level)
    for d in range(1, depth + 1):
        nxt = []
        for a in range(len(mirrors)):
            for ob in level:
                first = ob.word[0] if ob.word else ob.source
                if first == a:
                    continue
                nxt.append(OrbitBall((a,) + ob.word, ob.source, image_of_ball(mirrors[a], ob.ball), d))
        out.extend(nxt)
        level = nxt
    return out


def max_radius_by_depth(packing: Sequence[OrbitBall]) -> list[float]:
    depth = max(ob.depth for ob in packing)
    out = [0.0] * (depth + 1)
    for ob in packing:
        out[ob.depth] = max(out[ob.depth], ob.ball.radius)
    return out


def largest_ball_index(s: SchottkySet) -> int:
    """Index of the removed ball of largest radius; ties go to the lowest index."""
    return int(np.argmax(s.radii()))


def double(s: SchottkySet, i: int) -> SchottkySet:
    """Double across the i-th peripheral sphere: keep B_j, add g_i(B_j), j != i."""
    if not 0 <= i < len(s.balls):
        raise IndexError(f"no removed ball {i}")
    mirror = s.balls[i].sphere
    others = [b for j, b in enumerate(s.balls) if j != i]
    out = SchottkySet(tuple(others) + tuple(image_of_ball(mirror, b) for b in others), s.label)
    rep = validate(out)
    if not rep.valid:
        raise RuntimeError(f"doubled set failed validation, geometry bug: {rep.message}")
    return out


# -- unfolding --------------------------------------------------------------

@dataclass(frozen=True)
class Unfolding:
    word: tuple
    terminal: object
    status: str
    ball: int | None = None   # containing ball when depth capped


@dataclass
class UnfoldBatch:
    words: np.ndarray
    lengths: np.ndarray
    terminals: np.ndarray
    terminal_inf: np.ndarray
    status: np.ndarray      # kernels.LANDED / CAPPED / CENTER_HIT
    ball: np.ndarray

    def word(self, p):
        return tuple(int(a) for a in self.words[p, : self.lengths[p]])


def unfold_many(s: SchottkySet, coords, inf=None, max_depth=DEFAULT_DEPTH) -> UnfoldBatch:
    coords = np.atleast_2d(np.asarray(coords, dtype=np.float64))
    if coords.shape[1] != s.dim:
        raise GeometryError(f"dimension mismatch: {coords.shape[1]} vs {s.dim}")
    inf = np.zeros(coords.shape[0], dtype=bool) if inf is None else np.asarray(inf, dtype=bool)
    kinds, centers, radii = s.packed
    res = kernels.unfold_points(coords, inf, kinds, centers, radii, max_depth)
    return UnfoldBatch(*res)


def unfold(s: SchottkySet, x, max_depth=DEFAULT_DEPTH) -> Unfolding:
    """Reflect x through containing removed balls until it lands in the set.

    With word (j1..jk) and terminal y, x = g_j1 o ... o g_jk (y).
    """
    if x is INFINITY:
        coords, inf = np.zeros((1, s.dim)), np.ones(1, dtype=bool)
    else:
        coords, inf = split_points([as_point(x)])
    b = unfold_many(s, coords, inf, max_depth)
    word = b.word(0)
    if b.status[0] == kernels.CENTER_HIT:
        raise UnfoldError(
            f"reflection chain {word} hit the center of ball {int(b.ball[0])} exactly; "
            "perturb the point by ~1e-9 and retry"
        )
    terminal = join_point(b.terminals[0], b.terminal_inf[0])
    if b.status[0] == kernels.CAPPED:
        return Unfolding(word, terminal, DEPTH_CAPPED, int(b.ball[0]))
    return Unfolding(word, terminal, LANDED)


def in_set(s: SchottkySet, coords, inf=None) -> np.ndarray:
    """Membership in the Schottky set (not inside any removed open ball)."""
    b = unfold_many(s, coords, inf, max_depth=0)
    return b.status == kernels.LANDED
