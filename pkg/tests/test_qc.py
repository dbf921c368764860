import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from schottkylab import qc
from schottkylab.moebius import LinearMap, MoebiusMap, Sphere
from schottkylab.schottky import SchottkySet

from oracles import dilatation_eig, ellipse_minimax_residual

DIAG = LinearMap(np.diag([2.0, 1.0]))
INV = MoebiusMap((Sphere([0.0, 0.0], 1.0),))


def bump(x):
    """x + |x|^2 e1."""
    x = np.atleast_2d(x)
    y = x.copy()
    y[:, 0] += (x ** 2).sum(axis=1)
    return y


def periodic(x):
    """x + 0.1 sin(2 pi x1) e2, doubly periodic perturbation of the identity."""
    x = np.atleast_2d(x)
    y = x.copy()
    y[:, 1] += 0.1 * np.sin(2 * np.pi * x[:, 0])
    return y


def corner(x):
    x = np.atleast_2d(x)
    y = x.copy()
    y[:, 1] += np.abs(x[:, 0])
    return y


# -- directions ---------------------------------------------------------------

def test_sphere_directions():
    d2 = qc.sphere_directions(2)
    assert d2.shape == (256, 2) and np.allclose(np.linalg.norm(d2, axis=1), 1)
    d3 = qc.sphere_directions(3)
    assert d3.shape == (1024, 3) and np.allclose(np.linalg.norm(d3, axis=1), 1)
    assert abs(d3.mean(axis=0)).max() < 1e-2          # near-uniform
    assert np.array_equal(qc.sphere_directions(3, 100), qc.sphere_directions(3, 100))


# -- local dilatation ---------------------------------------------------------

def test_local_dilatation_examples():
    prof = qc.local_dilatation(DIAG, [0.3, -0.7], [1.0, 1e-2, 1e-5])
    assert np.allclose(prof.H, 2.0, rtol=0, atol=1e-9)
    inv = qc.local_dilatation(INV, [2.0, 0.0], [1e-1, 1e-2, 1e-3, 1e-4])
    assert abs(inv.H[-1] - 1) <= 1e-3 and np.all(np.diff(inv.H) < 0)
    b = qc.local_dilatation(bump, [0.0, 0.0], [1e-1, 1e-2, 1e-3, 1e-4])
    assert abs(b.K - 1) <= 1e-3 and np.all(np.diff(b.H) <= 0)
    assert b.extrapolated == pytest.approx(1.0, abs=1e-3)


def test_local_dilatation_sorts_radii_and_records_gaps():
    def f(x):
        y = np.atleast_2d(x).copy()
        y[np.linalg.norm(y, axis=1) > 0.5] = np.nan
        return y
    prof = qc.local_dilatation(f, [0.0, 0.0], [1e-3, 1.0, 1e-2])
    assert prof.radii.tolist() == [1.0, 1e-2, 1e-3]
    assert np.isnan(prof.H[0]) and np.all(np.isfinite(prof.H[1:]))
    assert prof.gaps and prof.gaps[0][0] == 1.0 and prof.K == pytest.approx(1.0)


@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3))
def test_linear_calibration(a, b, c, d):
    m = np.array([[a, b], [c, d]])
    if abs(np.linalg.det(m)) < 1e-2 * max(1.0, np.abs(m).max()) ** 2:
        return
    prof = qc.local_dilatation(LinearMap(m), [0.1, 0.2], [1.0, 1e-3], m=4096)
    k = dilatation_eig(m)
    assert np.all(prof.H >= 1 - 1e-9) and np.all(prof.L >= prof.l)
    # sampled axes lie within half a step d of the true ones, so
    # K (1 - d^2/2) / sqrt(1 + K^2 d^2) <= H <= K
    d = math.pi / 4096
    lo = k * (1 - d * d / 2) / math.sqrt(1 + k * k * d * d)
    assert np.all(prof.H <= k * (1 + 1e-12)) and np.all(prof.H >= lo * (1 - 1e-12))


def test_axis_aligned_linear_exact():
    for m in (np.diag([3.0, 0.5]), np.diag([1.0, 1.0]), 0.3 * np.eye(2)):
        prof = qc.local_dilatation(LinearMap(m), [1.0, 1.0], [1.0, 1e-4])
        assert np.allclose(prof.H, dilatation_eig(m), rtol=0, atol=1e-9)


def test_local_dilatation_many_matches_single():
    pts = np.array([[2.0, 0.0], [0.5, 1.5]])
    L, l, H = qc.local_dilatation_many(INV, pts, [1e-2, 1e-3])
    for k, p in enumerate(pts):
        prof = qc.local_dilatation(INV, p, [1e-2, 1e-3])
        assert np.allclose(H[k], prof.H, rtol=1e-14)


# -- quasisymmetry ------------------------------------------------------------

def _triples(n, seed=0):
    return np.random.default_rng(seed).uniform(-1, 1, (n, 3, 2))


def test_quasisymmetry_identity_and_similarity():
    tr = _triples(500)
    ident = qc.quasisymmetry_samples(lambda x: x, tr)
    assert np.allclose(ident.ratio, ident.t, rtol=1e-12)
    sim = LinearMap(3.0 * np.array([[0.6, -0.8], [0.8, 0.6]]), [5.0, 1.0])
    s = qc.quasisymmetry_samples(sim, tr)
    assert np.allclose(s.ratio, s.t, rtol=1e-12)
    assert s.envelope.size == 64


def test_quasisymmetry_linear_envelope():
    s = qc.quasisymmetry_samples(DIAG, _triples(100000, 1))
    assert np.all(s.ratio <= 2 * s.t * (1 + 1e-12))
    centers = np.sqrt(s.bucket_edges[:-1] * s.bucket_edges[1:])
    ok = np.isfinite(s.envelope) & (centers >= 1)
    assert np.all(s.envelope[ok] <= 2 * s.bucket_edges[1:][ok] * (1 + 1e-12))


def test_quasisymmetry_conventions_differ():
    tr = _triples(50)
    printed = qc.quasisymmetry_samples(lambda x: x, tr, convention="as_printed")
    assert not np.allclose(printed.ratio, printed.t)
    with pytest.raises(ValueError):
        qc.quasisymmetry_samples(lambda x: x, tr, convention="other")


def test_quasisymmetry_skips_degenerate_triples():
    tr = np.array([[[0, 0], [1, 0], [0, 0]], [[0, 0], [1, 0], [0, 1]]], dtype=float)
    s = qc.quasisymmetry_samples(lambda x: x, tr)
    assert s.skipped == 1 and s.t.size == 1


# -- rescaling and roundness --------------------------------------------------

def test_rescaled_map_examples():
    x = qc.sphere_directions(2, 64)
    for r in (1.0, 1e-3):
        assert np.allclose(qc.rescaled_map(DIAG, [0.4, 0.1], r)(x), DIAG(x))

    def cubic(y):
        y = np.atleast_2d(y)
        return y + y * np.linalg.norm(y, axis=1, keepdims=True)

    assert np.abs(qc.rescaled_map(cubic, [0.0, 0.0], 1e-3)(x) - x).max() <= 1e-3
    # Moebius fixing p = (2, 0): inversion in the sphere of radius 2 about the origin
    m = MoebiusMap((Sphere([0.0, 0.0], 2.0),))
    D = np.diag([-1.0, 1.0])             # derivative of the inversion at a fixed point
    assert np.abs(qc.rescaled_map(m, [2.0, 0.0], 1e-4)(x) - x @ D.T).max() <= 1e-3
    with pytest.raises(ValueError):
        qc.rescaled_map(DIAG, [0, 0], 0.0)


@given(st.integers(0, 2 ** 31 - 1))
def test_rescaled_unit_scale_identity(seed):
    x = np.random.default_rng(seed).normal(size=(10, 2))
    p = np.array([0.5, 0.5])
    got = qc.rescaled_map(INV, p, 1.0)(x)
    want = INV(p + x) - INV(p[None])
    ok = np.linalg.norm(p + x, axis=1) > 1e-3
    assert np.allclose(got[ok], want[ok], rtol=1e-12)


def test_rescaled_at_origin_unit_scale():
    x = np.random.default_rng(0).normal(size=(20, 2))
    assert np.allclose(qc.rescaled_map(bump, [0.0, 0.0], 1.0)(x), bump(x) - bump(np.zeros((1, 2))))


def test_roundness_examples():
    th = np.linspace(0, 2 * np.pi, 256, endpoint=False)
    circ = np.column_stack([3 + 0.7 * np.cos(th), -1 + 0.7 * np.sin(th)])
    rep = qc.roundness(circ)
    assert rep.residual <= 1e-12 and np.allclose(rep.center, [3, -1]) and math.isclose(rep.radius, 0.7)
    ell = qc.roundness(np.column_stack([2 * np.cos(th), np.sin(th)]))
    assert 0.30 <= ell.residual <= 0.36
    assert ell.residual >= ellipse_minimax_residual(2.0, 1.0) - 1e-6   # no fit beats the minimax circle
    g = MoebiusMap((Sphere([1.0, 2.0], 1.3), Sphere([-0.4, 0.0], 0.9)))
    small = np.column_stack([0.5 + 0.05 * np.cos(th), 0.2 + 0.05 * np.sin(th)])
    assert qc.roundness(g(small)).residual <= 1e-9


def test_roundness_3d_and_degenerate():
    d = qc.sphere_directions(3, 200)
    rep = qc.roundness(np.array([1.0, 2.0, 3.0]) + 0.25 * d)
    assert rep.residual <= 1e-12 and math.isclose(rep.radius, 0.25)
    line = np.column_stack([np.linspace(0, 1, 20), np.zeros(20)])
    assert qc.roundness(line).degenerate


# -- nested balls ---------------------------------------------------------------

def test_nested_ball_examples():
    g = MoebiusMap((Sphere([1.0, 2.0], 1.3), Sphere([-0.4, 0.0], 0.9)))
    p = np.array([0.5, 0.2])
    balls = [(p, 2.0 ** -k) for k in range(1, 11)]
    rep = qc.nested_ball_conformality_test(g, p, balls)
    assert rep.verdict == "CONFORMAL" and rep.residuals[-1] <= 1e-6
    rep = qc.nested_ball_conformality_test(DIAG, p, balls)
    assert rep.verdict == "NON-CONFORMAL"
    assert np.all((rep.residuals >= 0.30) & (rep.residuals <= 0.36))

    def flat(x):
        x = np.atleast_2d(x)
        return np.column_stack([x[:, 0] + x[:, 1] ** 2, x[:, 0] ** 3])

    rep = qc.nested_ball_conformality_test(flat, [0.0, 0.0], [((0.0, 0.0), 2.0 ** -k) for k in range(1, 8)])
    assert rep.degenerate and rep.verdict == "DEGENERATE"
    with pytest.raises(ValueError, match="does not contain"):
        qc.nested_ball_conformality_test(DIAG, p, [((5.0, 5.0), 0.1)])
    assert set(rep.as_dict()) >= {"verdict", "residuals", "radii"}


# -- jacobian and modulus -------------------------------------------------------

def test_jacobian_examples():
    est = qc.jacobian(DIAG, [0.3, 0.3])
    assert np.allclose(est.matrix, np.diag([2, 1]), atol=1e-9) and est.summary.dilatation == pytest.approx(2)
    assert qc.jacobian_convergence_order(periodic, [0.1, 0.2], 1e-3) >= 1.7


def test_modulus_examples():
    g = (np.arange(8) + 0.0) / 8
    base = np.array([[a, b] for a in g for b in g])
    scales = 2.0 ** -np.arange(4, 11)
    lin = qc.uniform_differentiability_modulus(DIAG, base, scales)
    assert lin.modulus.max() <= 1e-9
    per = qc.uniform_differentiability_modulus(periodic, base, scales)
    assert np.all(np.diff(per.modulus) < 0)
    bound = 0.5 * 0.1 * (2 * math.pi) ** 2       # half the sup of the second derivative
    assert abs(per.slope - 1) <= 0.2 and abs(per.coefficient - bound) <= 0.2 * bound
    cor = qc.uniform_differentiability_modulus(corner, base, scales)
    assert cor.modulus.min() >= 0.5 and abs(cor.slope) <= 0.1


# -- density --------------------------------------------------------------------

def test_density_examples():
    tiny = SchottkySet.from_disks([[0.3, 0.3], [-0.4, 0.2], [0.1, -0.5], [0.6, -0.2]], [0.01] * 4)
    d = qc.density_rescaling_probe(tiny, [0.0, 0.0], [0.5, 0.2, 0.1, 0.05])
    assert np.all(d.fractions >= 0.9)
    s = SchottkySet.from_disks([[0.0, 0.0], [3.0, 0.0], [0.0, 3.0]], [1.0, 0.5, 0.5])
    half = qc.density_rescaling_probe(s, [1.0, 0.0], [1e-3, 1e-4])
    assert np.all(np.abs(half.fractions - 0.5) <= 0.02)


@given(st.floats(-2, 2), st.floats(-2, 2), st.floats(1e-3, 1))
def test_density_is_a_fraction(x, y, r):
    s = SchottkySet.from_disks([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], [0.3, 0.3, 0.3])
    f = qc.density_rescaling_probe(s, [x, y], [r], m=64).fractions
    assert np.all((0 <= f) & (f <= 1))
