"""Equivariant extension of a map on a Schottky set to the whole sphere.

A point is unfolded into the Schottky set by reflections, the given map is
applied there, and the result is pushed back out through the reflections in
the paired target spheres. Points that are still inside a removed ball when
the depth budget runs out get a base extension of the boundary map instead.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from . import kernels
from .moebius import (
    INFINITY,
    Ball,
    MoebiusMap,
    PointMap,
    Sphere,
    chordal_distance_many,
    join_point,
    pack_mirrors,
    split_points,
)
from .qc import local_dilatation_many, sphere_directions
from .schottky import DEFAULT_DEPTH, SchottkySet, unfold_many

BASE_STRATEGIES = ("moebius_if_available", "radial")
TABLE_RESOLUTION_2D = 1024
TABLE_RESOLUTION_3D = 4096


class EvaluationError(ValueError):
    pass


# -- boundary maps ----------------------------------------------------------

@dataclass(frozen=True, eq=False)
class MoebiusBoundaryMap:
    """Restriction of a Moebius map to a peripheral sphere."""

    map: MoebiusMap
    is_moebius = True

    def apply(self, points):
        return self.map(points)


def _normalize(v):
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def _slerp(a, b, t):
    dot = np.clip((a * b).sum(axis=1), -1.0, 1.0)
    om = np.arccos(dot)
    small = om < 1e-9
    so = np.where(small, 1.0, np.sin(om))
    wa = np.where(small, 1.0 - t, np.sin((1.0 - t) * om) / so)
    wb = np.where(small, t, np.sin(t * om) / so)
    return _normalize(wa[:, None] * a + wb[:, None] * b)


@dataclass(frozen=True, eq=False)
class TableBoundaryMap:
    """Sphere homeomorphism stored as a table of image directions.

    ``table[k]`` is the unit direction (about the target center) of the image
    of ``source.center + source.radius * sample_dirs[k]``. In the plane the
    samples are equally spaced angles and lookups use spherical-linear
    interpolation; in 3-space they are a Fibonacci grid and lookups blend the
    three nearest entries.
    """

    source: Sphere
    target: Sphere
    table: np.ndarray
    is_moebius = False

    @classmethod
    def from_function(cls, source: Sphere, target: Sphere, fn, resolution: int | None = None):
        n = source.dim
        if resolution is None:
            resolution = TABLE_RESOLUTION_2D if n == 2 else TABLE_RESOLUTION_3D
        dirs = sphere_directions(n, resolution)
        img = np.asarray(fn(source.center + source.radius * dirs), dtype=np.float64)
        return cls(source, target, _normalize(img - target.center))

    @cached_property
    def sample_dirs(self):
        return sphere_directions(self.source.dim, self.table.shape[0])

    def directions(self, omega):
        m = self.table.shape[0]
        if self.source.dim == 2:
            theta = np.mod(np.arctan2(omega[:, 1], omega[:, 0]), 2 * np.pi)
            u = theta * m / (2 * np.pi)
            i = np.floor(u).astype(np.int64)
            t = u - i
            i %= m
            return _slerp(self.table[i], self.table[(i + 1) % m], t)
        cos = omega @ self.sample_dirs.T
        near = np.argsort(-cos, axis=1)[:, :3]
        ang = np.arccos(np.clip(np.take_along_axis(cos, near, axis=1), -1.0, 1.0))
        exact = ang[:, 0] < 1e-12
        w = 1.0 / np.maximum(ang, 1e-12)
        blended = _normalize((w[:, :, None] * self.table[near]).sum(axis=1))
        blended[exact] = self.table[near[exact, 0]]
        return blended

    def apply(self, points):
        omega = _normalize(np.atleast_2d(points) - self.source.center)
        return self.target.center + self.target.radius * self.directions(omega)


@dataclass(frozen=True, eq=False)
class BoundaryCorrespondence:
    """Pairing i -> i' of removed balls with boundary maps dB_i -> dB'_i'."""

    source: SchottkySet
    target: SchottkySet
    pairing: tuple
    boundary_maps: tuple

    def __post_init__(self):
        object.__setattr__(self, "pairing", tuple(int(p) for p in self.pairing))
        object.__setattr__(self, "boundary_maps", tuple(self.boundary_maps))
        if len(self.pairing) != len(self.source) or len(self.boundary_maps) != len(self.source):
            raise ValueError("pairing and boundary maps must list one entry per source ball")
        if len(self.target) != len(self.source):
            raise ValueError("source and target need the same number of balls")

    @property
    def is_bijection(self) -> bool:
        return sorted(self.pairing) == list(range(len(self.source)))

    def boundary_mismatch(self, samples: int = 64) -> float:
        """Largest relative distance of b_i(dB_i) from dB'_i' over sampled points."""
        worst = 0.0
        for i, (j, b) in enumerate(zip(self.pairing, self.boundary_maps)):
            src, tgt = self.source.balls[i].sphere, self.target.balls[j].sphere
            if not (isinstance(src, Sphere) and isinstance(tgt, Sphere)):
                continue
            pts = src.center + src.radius * sphere_directions(src.dim, samples)
            img = b.apply(pts)
            d = np.abs(np.linalg.norm(img - tgt.center, axis=1) - tgt.radius) / tgt.radius
            worst = max(worst, float(np.nanmax(d)))
        return worst

    def check(self, tol: float = 1e-9):
        if not self.is_bijection:
            raise ValueError(f"pairing {self.pairing} is not a bijection")
        mis = self.boundary_mismatch()
        if mis > tol:
            raise ValueError(f"boundary maps miss the paired target spheres by {mis:.3g}")
        return self


# -- the extension ----------------------------------------------------------

@dataclass
class EvaluationBatch:
    coords: np.ndarray
    inf: np.ndarray
    error: np.ndarray          # bool per point
    word_lengths: np.ndarray
    capped: np.ndarray         # bool per point
    messages: dict = field(default_factory=dict)


@dataclass(frozen=True, eq=False)
class EquivariantMap(PointMap):
    correspondence: BoundaryCorrespondence
    lambda_map: PointMap
    base_strategy: str = "moebius_if_available"
    max_depth: int = DEFAULT_DEPTH

    def __post_init__(self):
        if self.base_strategy not in BASE_STRATEGIES:
            raise ValueError(f"base_strategy must be one of {BASE_STRATEGIES}")

    @property
    def dim(self):
        return self.correspondence.source.dim

    @cached_property
    def _target_mirrors(self):
        # indexed by *source* letter: letter j reflects in dB'_{pairing[j]}
        c = self.correspondence
        return pack_mirrors([c.target.balls[p].sphere for p in c.pairing])

    def apply(self, coords, inf):
        res = evaluate_many(self, coords, inf, on_error="raise")
        return res.coords, res.inf

    def at(self, x):
        return evaluate(self, x)


def build_equivariant_map(corr: BoundaryCorrespondence, lambda_map: PointMap,
                          base_strategy: str = "moebius_if_available",
                          max_depth: int = DEFAULT_DEPTH, strict: bool = True) -> EquivariantMap:
    """Assemble an EquivariantMap; ``strict`` checks the correspondence first."""
    if strict:
        corr.check()
    return EquivariantMap(corr, lambda_map, base_strategy, max_depth)


def from_moebius(source: SchottkySet, g: MoebiusMap, base_strategy: str = "moebius_if_available",
                 max_depth: int = DEFAULT_DEPTH) -> EquivariantMap:
    """Extension data built from a global Moebius map restricted to the set."""
    target = SchottkySet(tuple(g.image_of_ball(b) for b in source.balls), source.label)
    corr = BoundaryCorrespondence(source, target, tuple(range(len(source))),
                                  tuple(MoebiusBoundaryMap(g) for _ in source.balls))
    return EquivariantMap(corr, g, base_strategy, max_depth)


def identity_map(source: SchottkySet, **kw) -> EquivariantMap:
    return from_moebius(source, MoebiusMap.identity(source.dim), **kw)


def projected_boundary_maps(source: SchottkySet, target: SchottkySet, f: PointMap,
                            pairing: Sequence[int] | None = None, resolution: int | None = None):
    """Table boundary maps x -> c' + r' * dir(f(x) - c') for each paired ball."""
    pairing = tuple(range(len(source))) if pairing is None else tuple(pairing)
    maps = []
    for i, j in enumerate(pairing):
        src, tgt = source.balls[i].sphere, target.balls[j].sphere
        maps.append(TableBoundaryMap.from_function(src, tgt, f, resolution))
    return BoundaryCorrespondence(source, target, pairing, tuple(maps))


def _radial(src: Sphere, tgt: Sphere, bmap, pts):
    v = pts - src.center
    dist = np.linalg.norm(v, axis=1)
    t = dist / src.radius
    safe = np.where(dist == 0, 1.0, dist)
    omega = v / safe[:, None]
    omega[dist == 0] = 0.0
    omega[dist == 0, 0] = 1.0
    b = np.atleast_2d(bmap.apply(src.center + src.radius * omega))
    d = _normalize(b - tgt.center)
    return tgt.center + (t * tgt.radius)[:, None] * d


def _round(ball: Ball, what):
    if not ball.is_round:
        raise EvaluationError(f"radial base extension needs a round interior {what} ball")
    return ball.sphere


def base_radial_extend(pair, bmap, x):
    """Cone extension of ``bmap`` from the center of B_j to that of B'_j'.

    ``x = c + t*rho*w`` goes to ``c' + t*rho' * dir(bmap(c + rho*w) - c')``.
    """
    src_ball, tgt_ball = pair
    src, tgt = _round(src_ball, "source"), _round(tgt_ball, "target")
    pts = np.atleast_2d(np.asarray(x, dtype=np.float64))
    out = _radial(src, tgt, bmap, pts)
    return out[0] if np.ndim(x) == 1 else out


def evaluate_many(em: EquivariantMap, coords, inf=None, on_error: str = "raise") -> EvaluationBatch:
    """Evaluate the extension on a batch of extended points."""
    coords = np.atleast_2d(np.asarray(coords, dtype=np.float64))
    npts = coords.shape[0]
    inf = np.zeros(npts, dtype=bool) if inf is None else np.asarray(inf, dtype=bool)
    corr = em.correspondence
    ub = unfold_many(corr.source, coords, inf, em.max_depth)

    vals = np.zeros_like(coords)
    vinf = np.zeros(npts, dtype=bool)
    err = ub.status == kernels.CENTER_HIT
    messages = {}
    for p in np.nonzero(err)[0][:8]:
        messages[int(p)] = "reflection chain hit a ball center; perturb the point"

    landed = ub.status == kernels.LANDED
    if landed.any():
        y, yi = em.lambda_map.apply(ub.terminals[landed], ub.terminal_inf[landed])
        vals[landed], vinf[landed] = y, yi

    capped = ub.status == kernels.CAPPED
    for j in np.unique(ub.ball[capped]):
        sel = capped & (ub.ball == j)
        z = ub.terminals[sel]
        bmap = corr.boundary_maps[j]
        if em.base_strategy == "moebius_if_available" and bmap.is_moebius:
            y, yi = bmap.map.apply(z, ub.terminal_inf[sel])
            vals[sel], vinf[sel] = y, yi
            continue
        try:
            src = _round(corr.source.balls[j], "source")
            tgt = _round(corr.target.balls[corr.pairing[j]], "target")
        except EvaluationError as exc:
            err |= sel
            for p in np.nonzero(sel)[0][:8]:
                messages[int(p)] = str(exc)
            continue
        vals[sel] = _radial(src, tgt, bmap, z)

    bad = ~err & ~vinf & ~np.all(np.isfinite(vals), axis=1)
    for p in np.nonzero(bad)[0][:8]:
        messages[int(p)] = f"map undefined at unfolded point {ub.terminals[p].tolist()}"
    err |= bad

    kinds, centers, radii = em._target_mirrors
    out, oinf = kernels.apply_words(vals, vinf, ub.words, ub.lengths, kinds, centers, radii)
    if err.any():
        if on_error == "raise":
            p = int(np.nonzero(err)[0][0])
            src = "INFINITY" if inf[p] else coords[p].tolist()
            raise EvaluationError(f"cannot evaluate at {src}: {messages.get(p, 'evaluation failed')}")
        out[err] = np.nan
        oinf[err] = False
    return EvaluationBatch(out, oinf, err, ub.lengths, capped, messages)


def evaluate(em: EquivariantMap, x):
    if x is INFINITY:
        coords, inf = np.zeros((1, em.dim)), np.ones(1, dtype=bool)
    else:
        coords, inf = split_points([x])
    res = evaluate_many(em, coords, inf)
    return join_point(res.coords[0], res.inf[0])


def check_equivariance(em: EquivariantMap, i: int, samples, samples_inf=None) -> float:
    """max chordal |F(g_i x) - g'_i'(F x)| over the samples."""
    corr = em.correspondence
    x = np.atleast_2d(np.asarray(samples, dtype=np.float64))
    xinf = np.zeros(x.shape[0], dtype=bool) if samples_inf is None else np.asarray(samples_inf, dtype=bool)
    g = MoebiusMap((corr.source.balls[i].sphere,))
    gp = MoebiusMap((corr.target.balls[corr.pairing[i]].sphere,))
    gx, gxi = g.apply(x, xinf)
    lhs = evaluate_many(em, gx, gxi)
    fx = evaluate_many(em, x, xinf)
    rhs, rhsi = gp.apply(fx.coords, fx.inf)
    res = chordal_distance_many(lhs.coords, lhs.inf, rhs, rhsi)
    return float(res.max()) if res.size else 0.0


# -- sampling helpers -------------------------------------------------------

def scene_box(s: SchottkySet, margin: float = 0.25):
    """Bounding box of the round removed balls, enlarged by ``margin`` of its size."""
    lo = np.min([b.sphere.center - b.sphere.radius for b in s.balls if b.is_round], axis=0)
    hi = np.max([b.sphere.center + b.sphere.radius for b in s.balls if b.is_round], axis=0)
    pad = margin * (hi - lo).max()
    return lo - pad, hi + pad


def scene_grid(s: SchottkySet, size: int, margin: float = 0.25) -> np.ndarray:
    """``size``^n regular grid over the scene box (cell-centered)."""
    lo, hi = scene_box(s, margin)
    axes = [lo[d] + (np.arange(size) + 0.5) * (hi[d] - lo[d]) / size for d in range(s.dim)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.column_stack([m.reshape(-1) for m in mesh])


def equivariance_samples(s: SchottkySet, i: int, count: int, seed: int = 0) -> np.ndarray:
    """Points on dB_i, near it on both sides, and spread over the scene box."""
    rng = np.random.default_rng(seed)
    ball = s.balls[i].sphere
    k = count // 3
    dirs = _normalize(rng.standard_normal((count, s.dim)))
    on = ball.center + ball.radius * dirs[:k]
    near = ball.center + ball.radius * (1 + rng.uniform(-0.2, 0.2, (k, 1))) * dirs[k:2 * k]
    lo, hi = scene_box(s)
    spread = rng.uniform(lo, hi, (count - 2 * k, s.dim))
    return np.concatenate([on, near, spread])


def deep_samples(s: SchottkySet, depth: int, count: int, seed: int = 0) -> np.ndarray:
    """Points g_w(y) with |w| = depth and y inside a removed ball B_j, j != last(w).

    Unfolding them with ``max_depth = depth`` ends depth-capped.
    """
    rng = np.random.default_rng(seed)
    m = len(s)
    out = []
    while len(out) < count:
        word = [int(rng.integers(m))]
        while len(word) < depth:
            a = int(rng.integers(m - 1))
            word.append(a if a < word[-1] else a + 1)
        choices = [j for j in range(m) if not word or j != word[-1]]
        j = choices[int(rng.integers(len(choices)))]
        b = s.balls[j].sphere
        y = b.center + b.radius * rng.uniform(0.05, 0.9) * _normalize(rng.standard_normal(s.dim))
        x = MoebiusMap(tuple(s.balls[a].sphere for a in word), s.dim).at(y)
        if x is not INFINITY:
            out.append(x)
    return np.array(out)


# -- dilatation survey ------------------------------------------------------

@dataclass
class SurveyReport:
    points: np.ndarray
    word_lengths: np.ndarray
    values: np.ndarray
    radii: np.ndarray
    H: np.ndarray              # (points, radii), NaN where evaluation failed
    errors: np.ndarray         # bool per point

    def summary(self):
        out = {"points": int(self.points.shape[0]), "errors": int(self.errors.sum()), "radii": []}
        for k, r in enumerate(self.radii):
            col = self.H[:, k]
            ok = np.isfinite(col)
            out["radii"].append({
                "radius": float(r),
                "min_H": float(col[ok].min()) if ok.any() else None,
                "max_H": float(col[ok].max()) if ok.any() else None,
                "median_H": float(np.median(col[ok])) if ok.any() else None,
                "evaluated": int(ok.sum()),
            })
        return out


def dilatation_survey(em: EquivariantMap, grid, radii: Sequence[float], m: int | None = None) -> SurveyReport:
    """Local dilatation H(p, r) of the extension at each grid point."""
    pts = np.atleast_2d(np.asarray(grid, dtype=np.float64))
    radii = np.asarray(radii, dtype=np.float64)
    base = evaluate_many(em, pts, on_error="nan")

    def f(x):
        r = evaluate_many(em, x, on_error="nan")
        y = r.coords.copy()
        y[r.inf] = np.nan
        return y

    _, _, H = local_dilatation_many(f, pts, radii, m)
    H[base.error] = np.nan
    return SurveyReport(pts, base.word_lengths, base.coords, radii, H, base.error)
