import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pltorsion.developing import read_metric
from pltorsion.metric import (GeometryError, MetricData, cm_volume, deficit_angles,
                              deficit_angles_coords, dihedral_angle, dihedral_angles_sq,
                              dihedral_gradient_coords, dihedral_gradient_sq, signed_volume,
                              sq_distances)


def test_regular_tetrahedron_volume():
    G = np.ones((4, 4)) - np.eye(4)
    assert cm_volume(3, G) == pytest.approx(math.sqrt(2) / 12, rel=1e-14)


def test_unit_right_simplices():
    for k in (2, 3, 4):
        X = np.vstack([np.zeros(k), np.eye(k)])
        assert cm_volume(k, sq_distances(X)) == pytest.approx(1 / math.factorial(k), rel=1e-13)


def test_signed_volume_orientation():
    X = np.vstack([np.zeros(3), np.eye(3)])
    assert signed_volume(X) == pytest.approx(1 / 6)
    assert signed_volume(X[[1, 0, 2, 3]]) == pytest.approx(-1 / 6)
    Y = np.vstack([np.zeros(4), np.eye(4)])
    assert signed_volume(Y) == pytest.approx(1 / 24)
    assert signed_volume(Y[[0, 2, 1, 3, 4]]) == pytest.approx(-1 / 24)


def test_regular_dihedral():
    G = np.ones((4, 4)) - np.eye(4)
    th = dihedral_angles_sq(G)
    assert th[0, 1] == pytest.approx(math.acos(1 / 3), abs=1e-14)
    X = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]], float)
    assert dihedral_angle(X, [2, 3]) == pytest.approx(math.acos(1 / 3), abs=1e-14)


def test_pentachoron_dihedral():
    # regular 4-simplex: dihedral angle arccos(1/4)
    G = np.ones((5, 5)) - np.eye(5)
    assert dihedral_angles_sq(G)[0, 1] == pytest.approx(math.acos(1 / 4), abs=1e-14)


def test_non_realizable_lengths():
    G = np.ones((4, 4)) - np.eye(4)
    G[0, 1] = G[1, 0] = 9.0  # edge of length 3 against unit triangle sides
    with pytest.raises(GeometryError):
        cm_volume(3, G)


def test_bad_matrix_shape():
    with pytest.raises(ValueError):
        cm_volume(3, np.zeros((3, 3)))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10 ** 6), st.floats(0.1, 10.0))
def test_cm_matches_coordinates_and_scales(seed, lam):
    X = np.random.default_rng(seed).normal(size=(4, 3))
    v = cm_volume(3, sq_distances(X))
    assert v == pytest.approx(abs(signed_volume(X)), rel=1e-8)
    assert cm_volume(3, lam ** 2 * sq_distances(X)) == pytest.approx(lam ** 3 * v, rel=1e-8)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10 ** 6), st.sampled_from([3, 4]))
def test_angle_paths_agree(seed, d):
    X = np.random.default_rng(seed).normal(size=(d + 1, d))
    th1, g1 = dihedral_gradient_sq(sq_distances(X))
    th2, g2 = dihedral_gradient_coords(X)
    assert np.allclose(th1, th2, atol=1e-9)
    assert np.abs(g1 - g2).max() <= 1e-6 * np.abs(g2).max()


def test_gradient_coords_on_thin_simplex():
    # 4-simplex whose last vertex sits near the centroid of the rest
    rng = np.random.default_rng(0)
    X = rng.normal(size=(5, 4))
    X[-1] = X[:-1].mean(0) + 1e-3 * rng.normal(size=4)
    _, g = dihedral_gradient_coords(X)
    L0 = sq_distances(X)
    h = 1e-7 * L0.max()
    for e, (i, j) in enumerate([(a, b) for a in range(5) for b in range(a + 1, 5)][:3]):
        Lp, Lm = L0.copy(), L0.copy()
        Lp[i, j] = Lp[j, i] = L0[i, j] + h
        Lm[i, j] = Lm[j, i] = L0[i, j] - h
        fd = (dihedral_angles_sq(Lp) - dihedral_angles_sq(Lm)) / (2 * h)
        assert np.abs(fd - g[:, :, e]).max() <= 1e-4 * np.abs(g).max()


def test_flat_sphere_has_zero_deficits(sphere3, sphere4):
    for c, pl in (sphere3, sphere4):
        m = read_metric(c, pl)
        assert np.abs(deficit_angles(c, m)).max() < 1e-10
        assert np.abs(deficit_angles_coords(c, pl)).max() < 1e-10


def test_flipped_sign_creates_curvature(sphere3):
    c, pl = sphere3
    m = read_metric(c, pl)
    eps = m.eps.copy()
    eps[0] = -eps[0]
    assert np.abs(deficit_angles(c, MetricData(m.L, eps))).max() > 1e-3


def test_perturbed_length_creates_curvature(lens51):
    c, pl, _ = lens51
    m = read_metric(c, pl)
    L = m.L.copy()
    L[0] *= 1.001
    assert np.abs(deficit_angles(c, MetricData(L, m.eps))).max() > 1e-6
