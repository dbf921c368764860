import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from schottkylab.moebius import (
    INFINITY,
    Ball,
    GeometryError,
    LinearMap,
    MoebiusMap,
    Plane,
    Sphere,
    apply_word,
    chordal_distance,
    chordal_distance_many,
    image_of_ball,
    image_of_sphere,
    invert,
    linear_dilatation,
    sphere_samples,
)

from oracles import circumcircle, dilatation_eig, invert_complex, word_complex

coord = st.floats(-5, 5, allow_nan=False)
radius = st.floats(0.05, 4)


def vec(n):
    return st.lists(coord, min_size=n, max_size=n).map(np.array)


# -- examples -----------------------------------------------------------------

def test_invert_examples():
    assert np.allclose(invert(Sphere([0, 0], 1), [2, 0]), [0.5, 0])
    assert np.allclose(invert(Sphere([1, 0], 2), [2, 0]), [5, 0])


def test_invert_center_and_infinity():
    s = Sphere([1.0, -2.0], 0.5)
    assert invert(s, [1.0, -2.0]) is INFINITY
    assert np.array_equal(invert(s, INFINITY), s.center)
    p = Plane([0.0, 1.0], 2.0)
    assert invert(p, INFINITY) is INFINITY
    assert np.allclose(invert(p, [3.0, 0.0]), [3.0, 4.0])


def test_invert_dimension_mismatch():
    with pytest.raises(GeometryError):
        invert(Sphere([0, 0], 1), [1, 2, 3])


def test_invert_matches_complex_oracle(rng):
    for _ in range(50):
        c, r, z = rng.normal(size=2), rng.uniform(0.1, 3), rng.normal(size=2) * 3
        assert np.allclose(invert(Sphere(c, r), z), invert_complex(c, r, z), rtol=1e-13, atol=1e-13)


def test_sphere_validation():
    with pytest.raises(GeometryError):
        Sphere([0, 0], 0.0)
    with pytest.raises(GeometryError):
        Plane([1.0, 1.0], 0.0)
    with pytest.raises(GeometryError):
        Sphere([0, np.inf], 1.0)


def test_image_of_sphere_example():
    img = image_of_sphere(Sphere([0, 0], 1), Sphere([3, 0], 1))
    # oracle: circle through three inverted points of the target
    pts = [invert_complex((0, 0), 1, p) for p in ([4, 0], [2, 0], [3, 1])]
    c, r = circumcircle(*pts)
    assert np.allclose(img.center, [0.375, 0]) and math.isclose(img.radius, 0.125)
    assert np.allclose(c, img.center) and math.isclose(r, img.radius)


def test_image_of_sphere_self_and_plane():
    s = Sphere([0.3, -0.2], 0.7)
    same = image_of_sphere(s, s)
    assert np.allclose(same.center, s.center) and math.isclose(same.radius, s.radius)
    img = image_of_sphere(Sphere([0, 0], 1), Plane([1.0, 0.0], 2.0))
    pts = [invert_complex((0, 0), 1, p) for p in ([2, 0], [2, 1], [2, -3])]
    c, r = circumcircle(*pts)
    assert np.allclose(img.center, [0.25, 0]) and math.isclose(img.radius, 0.25)
    assert np.allclose(c, [0.25, 0]) and math.isclose(r, 0.25)


def test_image_through_center_is_plane():
    img = image_of_sphere(Sphere([0, 0], 1), Sphere([1, 0], 1))
    assert isinstance(img, Plane)
    assert np.allclose(img.normal, [1, 0]) and math.isclose(img.offset, 0.5)
    back = image_of_sphere(Sphere([0, 0], 1), img)
    assert isinstance(back, Sphere) and np.allclose(back.center, [1, 0]) and math.isclose(back.radius, 1)


def test_image_of_ball_orientation():
    mirror = Sphere([0, 0], 1)
    outside = image_of_ball(mirror, Ball(Sphere([3, 0], 1)))
    assert outside.side == "interior"
    around = image_of_ball(mirror, Ball(Sphere([0.2, 0], 0.5)))
    # a ball containing the mirror center goes to the outside of a sphere
    assert around.side == "exterior"


def test_chordal_examples():
    assert chordal_distance([0, 0], INFINITY) == 2.0
    assert chordal_distance([1.5, 2.0], [1.5, 2.0]) == 0.0
    assert math.isclose(chordal_distance([0, 0], [1, 0]), math.sqrt(2))
    assert chordal_distance(INFINITY, INFINITY) == 0.0


def test_chordal_many_matches_scalar(rng):
    a, b = rng.normal(size=(20, 3)) * 4, rng.normal(size=(20, 3))
    ai, bi = rng.random(20) < 0.2, rng.random(20) < 0.2
    got = chordal_distance_many(a, ai, b, bi)
    for k in range(20):
        x = INFINITY if ai[k] else a[k]
        y = INFINITY if bi[k] else b[k]
        assert math.isclose(got[k], chordal_distance(x, y), rel_tol=1e-14, abs_tol=1e-15)


def test_apply_word_examples():
    ms = [Sphere([0, 0], 0.4), Sphere([1, 0], 0.3), Sphere([0, 1], 0.25)]
    x = np.array([0.4, 0.7])
    assert np.array_equal(apply_word([], x), x)
    assert np.allclose(apply_word([ms[1], ms[1]], x), x, atol=1e-12)
    got = apply_word([ms[1], ms[2]], x)
    assert np.allclose(got, invert(ms[1], invert(ms[2], x)))
    assert np.allclose(got, word_complex([((1, 0), 0.3), ((0, 1), 0.25)], x))


def test_linear_dilatation_examples():
    assert linear_dilatation(np.diag([2.0, 1.0])).dilatation == 2.0
    th = math.pi / 6
    rot = 0.7 * np.array([[math.cos(th), -math.sin(th)], [math.sin(th), math.cos(th)]])
    s = linear_dilatation(rot)
    assert s.conformal and abs(s.dilatation - 1) < 1e-12 and math.isclose(s.scale, 0.7)
    shear = linear_dilatation([[1, 1], [0, 1]])
    assert math.isclose(shear.dilatation, (3 + math.sqrt(5)) / 2, rel_tol=1e-12)
    assert math.isclose(shear.dilatation, dilatation_eig([[1, 1], [0, 1]]), rel_tol=1e-12)


def test_linear_dilatation_degenerate():
    s = linear_dilatation([[1.0, 0.0], [0.0, 0.0]])
    assert s.degenerate and math.isinf(s.dilatation) and not s.conformal
    with pytest.raises(GeometryError):
        linear_dilatation(np.ones((2, 3)))


def test_point_maps():
    g = MoebiusMap((Sphere([0, 0], 1), Sphere([2, 0], 1)))
    x = np.array([[0.3, 0.4], [5.0, -1.0]])
    y, yi = g.apply(x, np.zeros(2, bool))
    for k in range(2):
        assert np.allclose(y[k], g.at(x[k]))
    assert np.allclose(g.inverse()(y), x)
    assert g.at(g.pole()) is INFINITY
    lin = LinearMap(np.diag([2.0, 1.0]), [1.0, 0.0])
    assert np.allclose(lin(x), x * [2, 1] + [1, 0])
    assert lin.at(INFINITY) is INFINITY


# -- properties -----------------------------------------------------------------

@given(vec(3), radius, vec(3))
def test_involution(c, r, x):
    d = np.linalg.norm(x - c)
    if d < 1e-3 * r:
        return
    y = invert(Sphere(c, r), invert(Sphere(c, r), x))
    assert np.linalg.norm(y - x) <= 1e-10 * max(1.0, np.linalg.norm(x))


@given(vec(2), radius, st.floats(0, 2 * math.pi))
def test_mirror_points_fixed(c, r, th):
    x = c + r * np.array([math.cos(th), math.sin(th)])
    assert np.linalg.norm(invert(Sphere(c, r), x) - x) < 1e-12 * max(1, np.linalg.norm(x))


@given(vec(2), radius, vec(2), radius)
def test_sphere_image_consistency(mc, mr, tc, tr):
    mirror, target = Sphere(mc, mr), Sphere(tc, tr)
    d = np.linalg.norm(tc - mc)
    if abs(d - tr) < 1e-3 * max(tr, mr):
        return  # target too close to the mirror center, image nearly a plane
    img = image_of_sphere(mirror, target)
    pts = sphere_samples(target, 64)
    dist = np.linalg.norm(pts - mc, axis=1)
    pts = pts[dist > 1e-6]
    imgs = np.array([invert(mirror, p) for p in pts])
    if isinstance(img, Plane):
        res = np.abs(imgs @ img.normal - img.offset)
        assert res.max() <= 1e-9 * max(1.0, np.abs(imgs).max())
    else:
        res = np.abs(np.linalg.norm(imgs - img.center, axis=1) - img.radius) / img.radius
        assert res.max() <= 1e-9


@given(vec(2), vec(2), vec(2))
def test_chordal_axioms(x, y, z):
    dxy, dyx = chordal_distance(x, y), chordal_distance(y, x)
    assert dxy == dyx
    assert 0 <= dxy <= 2
    assert chordal_distance(x, z) <= dxy + chordal_distance(y, z) + 1e-12


@given(st.floats(0, 2 * math.pi), st.floats(-3, 3), st.booleans())
def test_conformal_linear_maps(th, loglam, flip):
    lam = 10.0 ** loglam
    t = np.array([[math.cos(th), -math.sin(th)], [math.sin(th), math.cos(th)]])
    if flip:
        t = t @ np.diag([1.0, -1.0])
    s = linear_dilatation(lam * t)
    assert s.dilatation - 1 <= 1e-9 and s.conformal


@given(st.integers(0, 2 ** 31 - 1))
def test_random_orthogonal_conformal(seed):
    r = np.random.default_rng(seed)
    q, _ = np.linalg.qr(r.normal(size=(4, 4)))
    lam = 10.0 ** r.uniform(-3, 3)
    assert linear_dilatation(lam * q).dilatation - 1 <= 1e-9
