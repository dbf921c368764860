"""Inversive geometry on R^n with a point at infinity.

Finite points are 1-d float arrays; the point at infinity is the singleton
``INFINITY`` and never a large float. Mirrors are round spheres or
hyperplanes (spheres through infinity). Moebius maps are kept as words of
reflections and evaluated point by point.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np

from . import kernels

GEOM_TOL = 1e-12


class GeometryError(ValueError):
    """Inconsistent geometric input (dimension mismatch, bad radius, ...)."""


class _Infinity:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "INFINITY"

    def __reduce__(self):
        return (_Infinity, ())


INFINITY = _Infinity()


def is_infinity(x) -> bool:
    return x is INFINITY


def as_point(x):
    """Coerce to an ExtendedPoint: INFINITY or a finite float vector."""
    if x is INFINITY:
        return x
    p = np.array(x, dtype=np.float64).reshape(-1)
    if p.size == 0 or not np.all(np.isfinite(p)):
        raise GeometryError(f"not a finite point: {x!r}")
    return p


def _vec(v, name):
    a = np.array(v, dtype=np.float64).reshape(-1)
    if a.size == 0 or not np.all(np.isfinite(a)):
        raise GeometryError(f"{name} must be a finite vector, got {v!r}")
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Sphere:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", _vec(self.center, "center"))
        r = float(self.radius)
        if not (np.isfinite(r) and r > 0):
            raise GeometryError(f"radius must be positive and finite, got {self.radius!r}")
        object.__setattr__(self, "radius", r)

    @property
    def dim(self) -> int:
        return self.center.size

    def __repr__(self):
        return f"Sphere(center={self.center.tolist()}, radius={self.radius!r})"


@dataclass(frozen=True, eq=False)
class Plane:
    """Hyperplane ``{x : normal . x = offset}``; a sphere through infinity."""

    normal: np.ndarray
    offset: float

    def __post_init__(self):
        nrm = _vec(self.normal, "normal")
        if abs(np.linalg.norm(nrm) - 1.0) > GEOM_TOL:
            raise GeometryError("plane normal must have unit length")
        object.__setattr__(self, "normal", nrm)
        object.__setattr__(self, "offset", float(self.offset))

    @classmethod
    def through(cls, normal, point):
        nrm = np.asarray(normal, dtype=np.float64)
        nrm = nrm / np.linalg.norm(nrm)
        return cls(nrm, float(nrm @ np.asarray(point, dtype=np.float64)))

    @property
    def dim(self) -> int:
        return self.normal.size

    def __repr__(self):
        return f"Plane(normal={self.normal.tolist()}, offset={self.offset!r})"


Mirror = Union[Sphere, Plane]


@dataclass(frozen=True, eq=False)
class Ball:
    """Open region bounded by ``sphere``.

    For a Plane the interior is ``normal . x < offset``.
    """

    sphere: Mirror
    side: str = "interior"

    def __post_init__(self):
        if self.side not in ("interior", "exterior"):
            raise GeometryError(f"side must be 'interior' or 'exterior', got {self.side!r}")

    @property
    def dim(self) -> int:
        return self.sphere.dim

    @property
    def is_round(self) -> bool:
        return isinstance(self.sphere, Sphere) and self.side == "interior"

    @property
    def radius(self) -> float:
        return self.sphere.radius if self.is_round else np.inf

    @property
    def center(self):
        return self.sphere.center if isinstance(self.sphere, Sphere) else None

    def contains(self, x, tol=kernels.BOUNDARY_TOL) -> bool:
        """Open-region membership; points within ``tol`` of the boundary are outside."""
        kind, c, r = _encode_ball(self)
        if x is INFINITY:
            return kind == 1
        x = as_point(x)
        if kind == 2:
            return bool(c @ x < r - tol * max(1.0, abs(r)))
        d = np.linalg.norm(x - c)
        return bool(d < r * (1 - tol)) if kind == 0 else bool(d > r * (1 + tol))


def _check_dim(a, b):
    if a != b:
        raise GeometryError(f"dimension mismatch: {a} vs {b}")


def invert(s: Mirror, x):
    """Reflect ``x`` in the mirror ``s`` (inversion for spheres)."""
    if x is INFINITY:
        return s.center.copy() if isinstance(s, Sphere) else INFINITY
    x = as_point(x)
    _check_dim(s.dim, x.size)
    if isinstance(s, Plane):
        return x - 2.0 * (s.normal @ x - s.offset) * s.normal
    d = x - s.center
    d2 = d @ d
    if d2 == 0.0:
        return INFINITY
    return s.center + (s.radius ** 2 / d2) * d


def image_of_sphere(mirror: Mirror, target: Mirror) -> Mirror:
    """Image set of ``target`` under reflection in ``mirror``."""
    _check_dim(mirror.dim, target.dim)
    if isinstance(mirror, Plane):
        nrm, off = mirror.normal, mirror.offset
        if isinstance(target, Sphere):
            return Sphere(invert(mirror, target.center), target.radius)
        # reflect normal as a vector, and one point of the plane
        tn = target.normal - 2.0 * (nrm @ target.normal) * nrm
        p0 = invert(mirror, target.offset * target.normal)
        return Plane(tn / np.linalg.norm(tn), float(tn / np.linalg.norm(tn) @ p0))

    c, rho2 = mirror.center, mirror.radius ** 2
    if isinstance(target, Plane):
        delta = target.offset - target.normal @ c
        if abs(delta) <= GEOM_TOL * max(1.0, mirror.radius):
            return target
        return Sphere(c + (rho2 / (2.0 * delta)) * target.normal, rho2 / (2.0 * abs(delta)))

    d = target.center - c
    power = d @ d - target.radius ** 2
    scale = max(d @ d, target.radius ** 2, mirror.radius ** 2)
    if abs(power) <= GEOM_TOL * scale:
        # target passes through the mirror's center: image is a hyperplane
        # perpendicular to d at the image of the antipodal point
        u = d / np.linalg.norm(d)
        far = invert(mirror, c + 2.0 * target.radius * u)
        return Plane(u, float(u @ far))
    return Sphere(c + (rho2 / power) * d, rho2 * target.radius / abs(power))


def _interior_point(ball: Ball, avoid=None):
    """Some point strictly inside the open region of ``ball``, away from ``avoid``."""
    s = ball.sphere
    if isinstance(s, Plane):
        base = s.offset * s.normal
        cands = [base - t * s.normal for t in (1.0, 2.0, 3.0)]
        if ball.side == "exterior":
            cands = [base + t * s.normal for t in (1.0, 2.0, 3.0)]
    elif ball.side == "interior":
        e = np.zeros(s.dim)
        e[0] = 1.0
        cands = [s.center + t * s.radius * e for t in (0.0, 0.5, -0.5)]
    else:
        e = np.zeros(s.dim)
        e[0] = 1.0
        cands = [s.center + t * s.radius * e for t in (2.0, 3.0, -2.0)]
    for p in cands:
        if avoid is None or np.linalg.norm(p - avoid) > 1e-6 * (1 + np.linalg.norm(p)):
            return p
    return cands[-1]  # pragma: no cover


def image_of_ball(mirror: Mirror, ball: Ball) -> Ball:
    """Image of the open region ``ball`` under reflection in ``mirror``."""
    img = image_of_sphere(mirror, ball.sphere)
    avoid = mirror.center if isinstance(mirror, Sphere) else None
    p = invert(mirror, _interior_point(ball, avoid))
    for side in ("interior", "exterior"):
        cand = Ball(img, side)
        if cand.contains(p, tol=0.0):
            return cand
    raise GeometryError("could not orient image ball")  # pragma: no cover


def chordal_distance(x, y) -> float:
    """Chordal distance on the one-point compactification (values in [0, 2])."""
    xi, yi = x is INFINITY, y is INFINITY
    if xi and yi:
        return 0.0
    if xi or yi:
        p = as_point(y if xi else x)
        return float(2.0 / np.sqrt(1.0 + p @ p))
    x, y = as_point(x), as_point(y)
    _check_dim(x.size, y.size)
    return float(2.0 * np.linalg.norm(x - y) / (np.sqrt(1.0 + x @ x) * np.sqrt(1.0 + y @ y)))


def chordal_distance_many(a, a_inf, b, b_inf):
    """Row-wise chordal distance between two batches of extended points."""
    a2 = np.where(a_inf, 0.0, (a ** 2).sum(axis=1))
    b2 = np.where(b_inf, 0.0, (b ** 2).sum(axis=1))
    fin = 2.0 * np.linalg.norm(a - b, axis=1) / (np.sqrt(1 + a2) * np.sqrt(1 + b2))
    out = np.where(a_inf & ~b_inf, 2.0 / np.sqrt(1 + b2), fin)
    out = np.where(b_inf & ~a_inf, 2.0 / np.sqrt(1 + a2), out)
    return np.where(a_inf & b_inf, 0.0, out)


def apply_word(mirrors: Sequence[Mirror], x):
    """Compose reflections: ``(m1, ..., mk)`` acts as m1 o ... o mk."""
    for s in reversed(mirrors):
        x = invert(s, x)
    return x


@dataclass(frozen=True)
class LinearMapSummary:
    matrix: np.ndarray
    singular_values: np.ndarray
    dilatation: float          # inf when degenerate
    degenerate: bool
    conformal: bool
    scale: float | None        # lambda in L = lambda*T when conformal


def linear_dilatation(matrix, rank_tol=None) -> LinearMapSummary:
    """Max stretch over min stretch of a square matrix on the unit sphere."""
    a = np.array(matrix, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise GeometryError(f"expected a square matrix, got shape {a.shape}")
    sv = np.linalg.svd(a, compute_uv=False)
    if rank_tol is None:
        rank_tol = a.shape[0] * np.finfo(float).eps
    degenerate = bool(sv[-1] <= rank_tol * sv[0]) or sv[0] == 0.0
    k = np.inf if degenerate else float(sv[0] / sv[-1])
    conformal = (not degenerate) and k <= 1 + 1e-9
    return LinearMapSummary(a, sv, k, degenerate, conformal, float(sv[0]) if conformal else None)


# -- batch encodings and point maps ----------------------------------------

def _encode_ball(ball: Ball):
    s = ball.sphere
    if isinstance(s, Plane):
        if ball.side == "interior":
            return 2, s.normal, s.offset
        return 2, -s.normal, -s.offset
    return (0 if ball.side == "interior" else 1), s.center, s.radius


def pack_balls(balls: Sequence[Ball]):
    """Kernel encoding ``(kinds, centers, radii)`` for a list of balls."""
    if not balls:
        raise GeometryError("need at least one ball")
    enc = [_encode_ball(b) for b in balls]
    kinds = np.array([e[0] for e in enc], dtype=np.int64)
    centers = np.array([e[1] for e in enc], dtype=np.float64)
    radii = np.array([e[2] for e in enc], dtype=np.float64)
    return kinds, centers, radii


def pack_mirrors(mirrors: Sequence[Mirror]):
    return pack_balls([Ball(m) for m in mirrors])


def split_points(points):
    """Sequence of ExtendedPoints -> (coords, inf_mask)."""
    pts = list(points)
    n = next((as_point(p).size for p in pts if p is not INFINITY), None)
    if n is None:
        raise GeometryError("cannot infer dimension from points that are all INFINITY")
    coords = np.zeros((len(pts), n))
    inf = np.zeros(len(pts), dtype=bool)
    for i, p in enumerate(pts):
        if p is INFINITY:
            inf[i] = True
        else:
            coords[i] = as_point(p)
    return coords, inf


def join_point(coords_row, inf_flag):
    return INFINITY if inf_flag else np.array(coords_row, dtype=np.float64)


class PointMap:
    """Map on extended points with a batch entry point.

    ``apply(coords, inf)`` maps a batch; calling the map on an ``(N, n)`` array
    of finite points returns finite images with NaN rows for infinity.
    """

    dim: int

    def apply(self, coords, inf):
        raise NotImplementedError

    def at(self, x):
        coords, inf = split_points([x]) if x is not INFINITY else (np.zeros((1, self.dim)), np.ones(1, bool))
        y, yi = self.apply(coords, inf)
        return join_point(y[0], yi[0])

    def __call__(self, coords):
        coords = np.atleast_2d(np.asarray(coords, dtype=np.float64))
        y, yi = self.apply(coords, np.zeros(coords.shape[0], dtype=bool))
        y = np.array(y, dtype=np.float64)
        y[yi] = np.nan
        return y


@dataclass(frozen=True, eq=False)
class MoebiusMap(PointMap):
    """Composition of reflections, ``mirrors[0] o ... o mirrors[-1]``."""

    mirrors: tuple
    dim: int = field(default=0)

    def __post_init__(self):
        object.__setattr__(self, "mirrors", tuple(self.mirrors))
        dims = {m.dim for m in self.mirrors}
        if self.dim:
            dims.add(self.dim)
        if len(dims) > 1:
            raise GeometryError(f"mirrors of mixed dimension: {sorted(dims)}")
        if not dims:
            raise GeometryError("an empty word needs an explicit dim")
        object.__setattr__(self, "dim", dims.pop())

    @classmethod
    def identity(cls, dim):
        return cls((), dim)

    def apply(self, coords, inf):
        coords = np.asarray(coords, dtype=np.float64)
        inf = np.asarray(inf, dtype=bool)
        k = len(self.mirrors)
        if k == 0:
            return coords.copy(), inf.copy()
        kinds, centers, radii = pack_mirrors(self.mirrors)
        words = np.tile(np.arange(k, dtype=np.int64), (coords.shape[0], 1))
        lengths = np.full(coords.shape[0], k, dtype=np.int64)
        return kernels.apply_words(coords, inf, words, lengths, kinds, centers, radii)

    def at(self, x):
        return apply_word(self.mirrors, x)

    def inverse(self) -> "MoebiusMap":
        return MoebiusMap(tuple(reversed(self.mirrors)), self.dim)

    def pole(self):
        """The point sent to infinity."""
        return self.inverse().at(INFINITY)

    def image_of_ball(self, ball: Ball) -> Ball:
        for m in reversed(self.mirrors):
            ball = image_of_ball(m, ball)
        return ball


@dataclass(frozen=True, eq=False)
class LinearMap(PointMap):
    """Affine map ``x -> A x + b``, fixing infinity."""

    matrix: np.ndarray
    translation: np.ndarray | None = None

    def __post_init__(self):
        a = np.array(self.matrix, dtype=np.float64)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise GeometryError("linear map needs a square matrix")
        b = np.zeros(a.shape[0]) if self.translation is None else np.array(self.translation, dtype=np.float64)
        object.__setattr__(self, "matrix", a)
        object.__setattr__(self, "translation", b)

    @property
    def dim(self):
        return self.matrix.shape[0]

    def apply(self, coords, inf):
        coords = np.asarray(coords, dtype=np.float64)
        out = coords @ self.matrix.T + self.translation
        out[inf] = 0.0
        return out, np.array(inf, dtype=bool)


@dataclass(frozen=True, eq=False)
class FunctionMap(PointMap):
    """Wrap a vectorised finite map ``f((N, n)) -> (N, n)``; infinity is fixed."""

    func: Callable
    dim: int

    def apply(self, coords, inf):
        coords = np.asarray(coords, dtype=np.float64)
        inf = np.asarray(inf, dtype=bool)
        out = np.zeros_like(coords)
        if (~inf).any():
            out[~inf] = np.asarray(self.func(coords[~inf]), dtype=np.float64)
        return out, inf.copy()


def sphere_samples(s: Sphere, count: int) -> np.ndarray:
    """Deterministic near-uniform points on a round sphere."""
    from .qc import sphere_directions

    return s.center + s.radius * sphere_directions(s.dim, count)
