import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from schottkylab import kernels
from schottkylab.moebius import Ball, Plane, Sphere, pack_balls

needs_numba = pytest.mark.skipif(not kernels.NUMBA_AVAILABLE, reason="numba not installed")

MIXED = [
    Ball(Sphere([0.0, 0.0], 0.3)),
    Ball(Sphere([1.0, 0.2], 0.25)),
    Ball(Sphere([0.0, 0.0], 3.0), "exterior"),
    Ball(Plane([0.0, 1.0], -1.5)),
]


def _points(seed, npts, n=2, frac_inf=0.05):
    r = np.random.default_rng(seed)
    pts = r.uniform(-3.5, 3.5, (npts, n))
    inf = r.random(npts) < frac_inf
    return pts, inf


@needs_numba
@given(st.integers(0, 2 ** 31 - 1), st.integers(0, 25))
def test_unfold_backends_agree(seed, depth):
    kinds, centers, radii = pack_balls(MIXED)
    pts, inf = _points(seed, 200)
    a = kernels.numba_impl.unfold_points(pts, inf, kinds, centers, radii, depth, kernels.BOUNDARY_TOL)
    b = kernels.numpy_impl.unfold_points(pts, inf, kinds, centers, radii, depth, kernels.BOUNDARY_TOL)
    for x, y in zip(a, b):
        if x.dtype.kind == "f":
            assert np.allclose(x, y, rtol=1e-12, atol=1e-12)
        else:
            assert np.array_equal(x, y)


@needs_numba
@given(st.integers(0, 2 ** 31 - 1))
def test_apply_words_backends_agree(seed):
    kinds, centers, radii = pack_balls(MIXED)
    r = np.random.default_rng(seed)
    pts, inf = _points(seed, 100)
    lengths = r.integers(0, 7, 100)
    words = r.integers(0, len(MIXED), (100, 6))
    a = kernels.numba_impl.apply_words(pts, inf, words, lengths, kinds, centers, radii)
    b = kernels.numpy_impl.apply_words(pts, inf, words, lengths, kinds, centers, radii)
    assert np.array_equal(a[1], b[1])
    fin = ~a[1]
    assert np.allclose(a[0][fin], b[0][fin], rtol=1e-12, atol=1e-12)


def test_center_hit_reported():
    kinds, centers, radii = pack_balls(MIXED)
    pts = np.array([[0.0, 0.0]])
    for impl in filter(None, (kernels.numpy_impl, kernels.numba_impl)):
        res = impl.unfold_points(pts, np.zeros(1, bool), kinds, centers, radii, 5, 1e-12)
        assert res[4][0] == kernels.CENTER_HIT and res[5][0] == 0


def test_infinity_is_reflected_by_exterior_ball():
    kinds, centers, radii = pack_balls(MIXED)
    res = kernels.unfold_points(np.zeros((1, 2)), np.ones(1, bool), kinds, centers, radii, 5)
    words, lengths, term, tinf, status, _ = res
    assert lengths[0] == 1 and words[0, 0] == 2 and not tinf[0]
    assert np.allclose(term[0], [0.0, 0.0])
    # the image of infinity lands on a ball center, which is a center hit next
    assert status[0] == kernels.CENTER_HIT


def test_env_flag_selects_numpy():
    code = "from schottkylab import kernels; print(kernels.BACKEND)"
    env = dict(os.environ, SCHOTTKYLAB_NO_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numpy"


def test_set_threads_is_harmless():
    assert kernels.set_threads(1) >= 1
