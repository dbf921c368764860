"""Numerical quasiconformality diagnostics.

Maps are vectorised callables ``f(points) -> images`` on ``(N, n)`` arrays of
finite points. Any PointMap from :mod:`schottkylab.moebius` qualifies, as
does an :class:`~schottkylab.extension.EquivariantMap`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .moebius import Ball, LinearMapSummary, Sphere, linear_dilatation

DEFAULT_DIRECTIONS_2D = 256
DEFAULT_DIRECTIONS_ND = 1024
DEFAULT_STEP = 1e-5


def sphere_directions(n: int, m: int | None = None) -> np.ndarray:
    """Deterministic, near-uniform unit vectors in R^n.

    Equally spaced angles for n = 2, a Fibonacci lattice for n = 3, and a
    fixed-seed Gaussian sample above that.
    """
    if n == 1:
        return np.array([[1.0], [-1.0]])
    if n == 2:
        m = DEFAULT_DIRECTIONS_2D if m is None else m
        t = 2.0 * np.pi * np.arange(m) / m
        return np.column_stack([np.cos(t), np.sin(t)])
    m = DEFAULT_DIRECTIONS_ND if m is None else m
    if n == 3:
        i = np.arange(m) + 0.5
        z = 1.0 - 2.0 * i / m
        phi = np.pi * (1.0 + 5 ** 0.5) * i
        rho = np.sqrt(1.0 - z * z)
        return np.column_stack([rho * np.cos(phi), rho * np.sin(phi), z])
    g = np.random.default_rng(0).standard_normal((m, n))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def _eval(f, pts):
    return np.asarray(f(np.atleast_2d(pts)), dtype=np.float64)


# -- pointwise dilatation ---------------------------------------------------

@dataclass
class DilatationProfile:
    point: np.ndarray
    radii: np.ndarray
    L: np.ndarray
    l: np.ndarray
    H: np.ndarray
    K: float                   # H at the smallest radius evaluated
    trend: float               # dH/dr over the last three radii
    extrapolated: float        # linear extrapolation of H to r = 0
    gaps: list = field(default_factory=list)

    def rows(self):
        return [(float(r), float(a), float(b), float(h)) for r, a, b, h in zip(self.radii, self.L, self.l, self.H)]


def local_dilatation(f: Callable, p, radii: Sequence[float], m: int | None = None) -> DilatationProfile:
    """L(p,r), l(p,r) and H = L/l over m directions for each radius."""
    p = np.asarray(p, dtype=np.float64)
    radii = np.sort(np.asarray(radii, dtype=np.float64))[::-1]
    dirs = sphere_directions(p.size, m)
    L = np.full(radii.size, np.nan)
    l = np.full(radii.size, np.nan)
    gaps = []
    try:
        fp = _eval(f, p[None])[0]
    except Exception as exc:  # noqa: BLE001 - recorded, not fatal
        fp = np.full(p.size, np.nan)
        gaps.append((0.0, repr(exc)))
    for k, r in enumerate(radii):
        if not np.all(np.isfinite(fp)):
            gaps.append((float(r), "f(p) not finite"))
            continue
        try:
            img = _eval(f, p + r * dirs)
        except Exception as exc:  # noqa: BLE001
            gaps.append((float(r), repr(exc)))
            continue
        d = np.linalg.norm(img - fp, axis=1)
        if not np.all(np.isfinite(d)):
            gaps.append((float(r), "non-finite image"))
            continue
        L[k], l[k] = d.max(), d.min()
    with np.errstate(divide="ignore", invalid="ignore"):
        H = L / l
    ok = np.isfinite(H)
    K = float(H[ok][-1]) if ok.any() else np.nan
    trend, extrap = np.nan, K
    if ok.sum() >= 3:
        rr, hh = radii[ok][-3:], H[ok][-3:]
        trend, extrap = np.polyfit(rr, hh, 1)
    return DilatationProfile(p, radii, L, l, H, K, float(trend), float(extrap), gaps)


def local_dilatation_many(f: Callable, points, radii: Sequence[float], m: int | None = None,
                          chunk: int = 1 << 18):
    """Batched L, l, H of shape (points, radii); NaN where f is not finite.

    Radii are used in the order given.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    radii = np.asarray(radii, dtype=np.float64)
    dirs = sphere_directions(pts.shape[1], m)
    nd = dirs.shape[0]
    fp = _eval(f, pts)
    L = np.full((pts.shape[0], radii.size), np.nan)
    l = np.full_like(L, np.nan)
    per = max(1, chunk // nd)
    for k, r in enumerate(radii):
        for a in range(0, pts.shape[0], per):
            blk = pts[a:a + per]
            q = (blk[:, None, :] + r * dirs[None]).reshape(-1, pts.shape[1])
            img = _eval(f, q).reshape(blk.shape[0], nd, -1)
            d = np.linalg.norm(img - fp[a:a + per, None, :], axis=2)
            ok = np.all(np.isfinite(d), axis=1)
            L[a:a + per, k] = np.where(ok, d.max(axis=1), np.nan)
            l[a:a + per, k] = np.where(ok, d.min(axis=1), np.nan)
    with np.errstate(divide="ignore", invalid="ignore"):
        H = L / l
    return L, l, H


# -- quasisymmetry ----------------------------------------------------------

@dataclass
class QuasisymmetryScatter:
    t: np.ndarray
    ratio: np.ndarray
    bucket_edges: np.ndarray
    envelope: np.ndarray       # max ratio per bucket, NaN where empty
    skipped: int


def quasisymmetry_samples(f: Callable, triples, convention: str = "standard", buckets: int = 64) -> QuasisymmetryScatter:
    """Distance-ratio scatter for the quasisymmetry inequality.

    For a triple (x, x1, x2) the image ratio is |f(x)-f(x1)| / |f(x)-f(x2)|.
    The source ratio t is |x-x1| / |x-x2| with ``convention="standard"``; with
    ``"as_printed"`` it is |x-x1| / |x1-x2|.
    """
    tr = np.asarray(triples, dtype=np.float64)
    x, x1, x2 = tr[:, 0], tr[:, 1], tr[:, 2]
    fx, fx1, fx2 = _eval(f, x), _eval(f, x1), _eval(f, x2)
    num_src = np.linalg.norm(x - x1, axis=1)
    if convention == "standard":
        den_src = np.linalg.norm(x - x2, axis=1)
    elif convention == "as_printed":
        den_src = np.linalg.norm(x1 - x2, axis=1)
    else:
        raise ValueError(f"unknown convention {convention!r}")
    den_img = np.linalg.norm(fx - fx2, axis=1)
    good = (den_src > 0) & (den_img > 0) & (num_src > 0)
    t = num_src[good] / den_src[good]
    ratio = np.linalg.norm(fx - fx1, axis=1)[good] / den_img[good]
    if t.size:
        lo, hi = t.min(), t.max()
        if hi <= lo:
            hi = lo * (1 + 1e-12) + 1e-300
        edges = np.geomspace(lo, hi, buckets + 1)
        idx = np.clip(np.searchsorted(edges, t, side="right") - 1, 0, buckets - 1)
        env = np.full(buckets, np.nan)
        for b in range(buckets):
            sel = idx == b
            if sel.any():
                env[b] = ratio[sel].max()
    else:
        edges, env = np.array([]), np.array([])
    return QuasisymmetryScatter(t, ratio, edges, env, int((~good).sum()))


# -- rescaling, roundness ---------------------------------------------------

def rescaled_map(f: Callable, p, r: float) -> Callable:
    """x -> (f(p + r x) - f(p)) / r."""
    if not r > 0:
        raise ValueError("r must be positive")
    p = np.asarray(p, dtype=np.float64)
    fp = _eval(f, p[None])[0]

    def g(x):
        return (_eval(f, p + r * np.atleast_2d(x)) - fp) / r

    return g


@dataclass
class RoundnessReport:
    center: np.ndarray
    radius: float
    residual: float
    degenerate: bool


def roundness(points) -> RoundnessReport:
    """Fit a sphere (algebraic fit, one Gauss-Newton step) and report max relative deviation."""
    pts = np.asarray(points, dtype=np.float64)
    npts, n = pts.shape
    if npts < n + 2:
        raise ValueError(f"need at least {n + 2} points, got {npts}")
    # normalise for conditioning; undone at the end
    mu = pts.mean(axis=0)
    scale = np.sqrt(((pts - mu) ** 2).sum(axis=1).mean())
    nan = RoundnessReport(np.full(n, np.nan), np.nan, np.inf, True)
    if not np.isfinite(scale) or scale == 0.0:
        return RoundnessReport(mu, 0.0, 0.0, True)
    q = (pts - mu) / scale

    a = np.column_stack([2.0 * q, np.ones(npts)])
    b = (q ** 2).sum(axis=1)
    sol, _, rank, sv = np.linalg.lstsq(a, b, rcond=None)
    if rank < n + 1 or sv[-1] < 1e-10 * sv[0]:
        return nan
    c = sol[:n]
    r2 = sol[n] + c @ c
    if not r2 > 0:
        return nan
    R = math.sqrt(r2)

    diff = q - c
    dist = np.linalg.norm(diff, axis=1)
    if np.all(dist > 0):
        res = dist - R
        J = np.column_stack([-diff / dist[:, None], -np.ones(npts)])
        step, *_ = np.linalg.lstsq(J, -res, rcond=None)
        c = c + step[:n]
        R = R + step[n]
        dist = np.linalg.norm(q - c, axis=1)

    radius = R * scale
    degenerate = not (1e-12 < radius < 1e12)
    resid = float(np.max(np.abs(dist - R)) / R) if R > 0 else np.inf
    return RoundnessReport(mu + scale * c, float(radius), resid, bool(degenerate))


# -- jacobians --------------------------------------------------------------

@dataclass
class JacobianEstimate:
    matrix: np.ndarray
    step: float
    summary: LinearMapSummary
    richardson_gap: float      # max |J(h) - J(h/2)|


def _central_jacobian(f, p, h):
    n = p.size
    e = np.eye(n) * h
    pts = np.concatenate([p + e, p - e])
    img = _eval(f, pts)
    return ((img[:n] - img[n:]) / (2.0 * h)).T


def jacobian(f: Callable, p, h: float = DEFAULT_STEP) -> JacobianEstimate:
    p = np.asarray(p, dtype=np.float64)
    j = _central_jacobian(f, p, h)
    j2 = _central_jacobian(f, p, h / 2)
    return JacobianEstimate(j, h, linear_dilatation(j), float(np.abs(j - j2).max()))


def jacobian_convergence_order(f: Callable, p, h: float) -> float:
    """Observed order of the central-difference Jacobian from steps h, h/2, h/4."""
    p = np.asarray(p, dtype=np.float64)
    j1, j2, j3 = (_central_jacobian(f, p, h / 2 ** k) for k in range(3))
    a = np.abs(j1 - j2).max()
    b = np.abs(j2 - j3).max()
    return float(np.log2(a / b))


# -- nested balls -----------------------------------------------------------

@dataclass
class NestedBallReport:
    radii: np.ndarray
    residuals: np.ndarray
    fitted_radii: np.ndarray   # radius of the rescaled image sphere
    jacobian: JacobianEstimate
    verdict: str               # CONFORMAL | NON-CONFORMAL | DEGENERATE
    degenerate: bool

    def as_dict(self):
        return {
            "verdict": self.verdict,
            "degenerate": self.degenerate,
            "radii": self.radii.tolist(),
            "residuals": self.residuals.tolist(),
            "fitted_radii": self.fitted_radii.tolist(),
            "jacobian_dilatation": self.jacobian.summary.dilatation,
        }


def _as_center_radius(b):
    if isinstance(b, Ball):
        if not isinstance(b.sphere, Sphere) or b.side != "interior":
            raise ValueError("nested-ball test needs round interior balls")
        return b.sphere.center, b.sphere.radius
    c, r = b
    return np.asarray(c, dtype=np.float64), float(r)


def nested_ball_conformality_test(f: Callable, p, balls, m: int | None = None,
                                  h: float = DEFAULT_STEP, tol: float = 1e-3,
                                  k_tol: float = 1.01) -> NestedBallReport:
    """Roundness of rescaled images of shrinking balls around p, plus D_p f."""
    p = np.asarray(p, dtype=np.float64)
    dirs = sphere_directions(p.size, m)
    radii, resid, fitted = [], [], []
    any_degenerate = False
    for b in balls:
        c, r = _as_center_radius(b)
        if np.linalg.norm(p - c) > r:
            raise ValueError(f"ball (center={c.tolist()}, r={r}) does not contain p")
        g = rescaled_map(f, p, r)
        img = g((c - p) / r + dirs)
        rep = roundness(img)
        radii.append(r)
        resid.append(rep.residual)
        fitted.append(rep.radius)
        any_degenerate |= rep.degenerate
    jac = jacobian(f, p, h)
    radii, resid, fitted = map(np.asarray, (radii, resid, fitted))
    if jac.summary.degenerate or (resid.size and any_degenerate):
        verdict, degenerate = "DEGENERATE", True
    elif resid.size and resid[-1] <= tol and jac.summary.dilatation <= k_tol:
        verdict, degenerate = "CONFORMAL", False
    else:
        verdict, degenerate = "NON-CONFORMAL", False
    return NestedBallReport(radii, resid, fitted, jac, verdict, degenerate)


# -- uniform differentiability ----------------------------------------------

@dataclass
class ModulusTable:
    scales: np.ndarray
    modulus: np.ndarray
    slope: float               # log-log slope of modulus against scale
    coefficient: float         # modulus/scale at the smallest scale


def uniform_differentiability_modulus(f: Callable, base_points, scales: Sequence[float],
                                      m: int = 32, h: float = DEFAULT_STEP) -> ModulusTable:
    """max over q, |x| = s of |f(q+x) - f(q) - D_q f(x)| / |x| for each scale s."""
    qs = np.atleast_2d(np.asarray(base_points, dtype=np.float64))
    scales = np.asarray(scales, dtype=np.float64)
    dirs = sphere_directions(qs.shape[1], m)
    jacs = [_central_jacobian(f, q, h) for q in qs]
    fq = _eval(f, qs)
    mod = np.zeros(scales.size)
    for k, s in enumerate(scales):
        x = s * dirs
        worst = 0.0
        for q, J, f0 in zip(qs, jacs, fq):
            rem = _eval(f, q + x) - f0 - x @ J.T
            worst = max(worst, float(np.linalg.norm(rem, axis=1).max() / s))
        mod[k] = worst
    pos = mod > 0
    slope = float(np.polyfit(np.log(scales[pos]), np.log(mod[pos]), 1)[0]) if pos.sum() >= 2 else 0.0
    i = int(np.argmin(scales))
    return ModulusTable(scales, mod, slope, float(mod[i] / scales[i]))


# -- density on spheres -----------------------------------------------------

@dataclass
class DensityTable:
    point: np.ndarray
    radii: np.ndarray
    fractions: np.ndarray


def density_rescaling_probe(schottky_set, p, radii: Sequence[float], m: int | None = None,
                            depth: int = 20) -> DensityTable:
    """Fraction of samples on the sphere |x - p| = r that lie in the Schottky set."""
    from .kernels import LANDED
    from .schottky import unfold_many

    p = np.asarray(p, dtype=np.float64)
    dirs = sphere_directions(p.size, m)
    radii = np.asarray(radii, dtype=np.float64)
    frac = np.empty(radii.size)
    for k, r in enumerate(radii):
        b = unfold_many(schottky_set, p + r * dirs, max_depth=depth)
        frac[k] = float(np.mean((b.lengths == 0) & (b.status == LANDED)))
    return DensityTable(p, radii, frac)
