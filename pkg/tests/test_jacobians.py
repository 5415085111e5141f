import numpy as np
import pytest

from pltorsion.developing import gauge_basis, read_metric
from pltorsion.jacobians import (assemble_A3, assemble_B3, assemble_D4, assemble_Q4, deviation_basis,
                                 midpoint_area_change, fd_check, fd_oracle, numerical_rank,
                                 orthonormal_complement, simplex_deviation_block,
                                 simplex_deviation_identity, triangle_area)
from pltorsion.zoo import gen_lens, gen_s1xs2


def test_fd_oracle_on_polynomial():
    J, err = fd_oracle(lambda x: x[0] ** 3 + 2 * x[0], [np.sqrt(4 / 3)])
    assert J[0] == pytest.approx(6.0, rel=1e-9)
    J, _ = fd_oracle(lambda x: x ** 2, [3.0])
    assert J[0, 0] == pytest.approx(6.0, rel=1e-9)


def test_planar_midpoint_deviation():
    P = np.array([[-1.0, 0, 0], [1.0, 0, 0], [0, 1.0, 0]])
    eps = 1e-3
    dev = np.zeros((3, 3))
    dev[0] = [0, -eps, 0]  # midpoint of side (0, 1) pushed away from the apex
    assert midpoint_area_change(P, dev) == pytest.approx(2 * eps, rel=1e-10)
    assert midpoint_area_change(P, np.zeros((3, 3))) == pytest.approx(0.0, abs=1e-15)


def test_orthonormal_complement():
    u = np.array([0.3, -1.2, 0.5, 2.0])
    T = orthonormal_complement(u)
    assert np.allclose(T.T @ T, np.eye(3))
    assert np.allclose(u @ T, 0)


def test_A_symmetric_and_chain(lens51):
    c, pl, _ = lens51
    m = read_metric(c, pl)
    A = assemble_A3(c, m, placement=pl)
    scale = np.abs(assemble_A3(c, m, absolute=True, placement=pl)).max()
    B = assemble_B3(c, pl, gauge_basis(pl))
    assert np.abs(A - A.T).max() <= 1e-10 * scale
    assert np.abs(A @ B).max() <= 1e-10 * scale * np.abs(B).max()


def test_length_and_coordinate_paths_agree(lens51):
    c, pl, _ = lens51
    m = read_metric(c, pl)
    A1 = assemble_A3(c, m)
    A2 = assemble_A3(c, m, placement=pl)
    assert np.abs(A1 - A2).max() <= 1e-7 * np.abs(A2).max()


def test_chain_4d_sphere4(sphere4):
    c, pl = sphere4
    Q = assemble_Q4(c, read_metric(c, pl), placement=pl)
    D = assemble_D4(c, pl)
    assert np.abs(Q.T @ D).max() <= 1e-10 * np.abs(Q).max() * np.abs(D).max()
    assert numerical_rank(Q)[0] == 1


def test_D4_shape(sphere4):
    c, pl = sphere4
    D = assemble_D4(c, pl)
    assert D.shape == (20, 45)


def test_deviation_basis_orthogonal(sphere4):
    c, pl = sphere4
    b = deviation_basis(c, pl)
    for e in range(c.n_cells(1)):
        assert np.allclose(b.direction[e] @ b.triples[e], 0)


def test_simplex_identity_on_examples():
    rng = np.random.default_rng(3)
    for _ in range(10):
        P = rng.normal(size=(5, 4))
        lhs, rhs = simplex_deviation_identity(P)
        assert lhs == pytest.approx(rhs, rel=1e-10)


def test_simplex_identity_basis_invariant():
    rng = np.random.default_rng(8)
    P = rng.normal(size=(5, 4))
    T = orthonormal_complement(P[1] - P[0])
    Q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
    a = abs(np.linalg.det(simplex_deviation_block(P, T)))
    b = abs(np.linalg.det(simplex_deviation_block(P, T @ Q)))
    assert a == pytest.approx(b, rel=1e-12)


def test_simplex_identity_unit_corner():
    P = np.vstack([np.zeros(4), np.eye(4)])
    lhs, rhs = simplex_deviation_identity(P)
    assert rhs == pytest.approx(1.0, rel=1e-14)
    assert lhs == pytest.approx(1.0, rel=1e-12)


def test_numerical_rank_gap():
    M = np.diag([1.0, 1e-3, 1e-14])
    r, s, gap = numerical_rank(M)
    assert r == 2 and gap == pytest.approx(1e11)
    assert numerical_rank(np.zeros((3, 3)))[0] == 0


def test_triangle_area():
    assert triangle_area([[0, 0], [2, 0], [0, 3]]) == pytest.approx(3.0)


@pytest.mark.parametrize("make", [
    lambda: gen_lens(3, 1, 1, 2)[:2],
    lambda: gen_lens(5, 2, 2, 1)[:2],
    lambda: gen_s1xs2(0.9, 1.1, 2)[:2],
])
def test_fd_check(make):
    c, pl = make()
    for name, err in fd_check(c, pl).items():
        assert err <= 1e-6, name


def test_fd_check_sphere4(sphere4):
    res = fd_check(*sphere4)
    assert set(res) == {"Q4", "D4"}
    assert max(res.values()) <= 1e-6


def test_A_vanishes_on_L21():
    # E = 4 equals the gauge size, so exactness leaves no room for a nonzero A
    c, pl, _ = gen_lens(2, 1, 1, 0)
    m = read_metric(c, pl)
    scale = np.abs(assemble_A3(c, m, absolute=True, placement=pl)).max()
    assert np.abs(assemble_A3(c, m, placement=pl)).max() <= 1e-12 * scale
    assert len(gauge_basis(pl)) == c.n_cells(1) == 4
