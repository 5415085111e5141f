import math

import numpy as np
import pytest

from pltorsion.developing import (CoverPlacement, DevelopError, Representation, deck_rotation_angle,
                                  develop, equivariant_placement, fit_isometry, gauge_basis,
                                  gauge_basis_size, read_metric, roundtrip_deviation)
from pltorsion.metric import MetricData
from pltorsion.zoo import gen_lens, gen_s1xs2, gen_sphere3


@pytest.mark.parametrize("make, size", [
    (lambda: gen_sphere3(0)[1], 9),
    (lambda: gen_lens(5, 1, 1, 0)[1], 4),
    (lambda: gen_lens(7, 2, 2, 0)[1], 4),
])
def test_gauge_sizes(make, size):
    pl = make()
    assert len(gauge_basis(pl)) == size == gauge_basis_size(len(pl.base), pl.rep.kind)


def test_gauge_sizes_formula():
    assert gauge_basis_size(6, "single_axis_cyclic") == 16
    assert gauge_basis_size(4, "cyclic_infinite") == 12
    assert gauge_basis_size(6, "multi_axis") == 18
    assert gauge_basis_size(5, "trivial") == 9


def test_rotation_isometry():
    rep = Representation("single_axis_cyclic", 3, 5, 2)
    R, t = rep.isometry(1)
    assert np.allclose(R @ R.T, np.eye(3))
    assert math.isclose(math.atan2(R[1, 0], R[0, 0]), 4 * math.pi / 5)
    assert np.allclose(t, 0)
    R5, _ = rep.isometry(5)
    assert np.allclose(R5, np.eye(3))


def test_equivariance(lens51):
    _, pl, _ = lens51
    assert pl.equivariance_residual() < 1e-12


@pytest.mark.parametrize("make", [
    lambda: gen_sphere3(3)[:2],
    lambda: gen_lens(5, 1, 1, 4)[:2],
    lambda: gen_lens(7, 3, 2, 1)[:2],
    lambda: gen_s1xs2(0.7, 1.3, 0)[:2],
])
def test_roundtrip(make):
    c, pl = make()
    dev = develop(c, read_metric(c, pl))
    assert roundtrip_deviation(c, pl, dev) < 1e-8


@pytest.mark.parametrize("p, k", [(5, 1), (5, 2), (7, 3)])
def test_deck_angle(p, k):
    c, pl, _ = gen_lens(p, 1, k, 0)
    dev = develop(c, read_metric(c, pl))
    want = 2 * math.pi * k / p
    want = min(want, 2 * math.pi - want)
    assert deck_rotation_angle(c, dev) == pytest.approx(want, abs=1e-9)


def test_curved_input_rejected(lens51):
    c, pl, _ = lens51
    m = read_metric(c, pl)
    L = m.L.copy()
    L[2] *= 1 + 1e-5
    with pytest.raises(DevelopError) as e:
        develop(c, MetricData(L, m.eps))
    assert e.value.code == "CURVED_INPUT"


def test_fit_isometry_recovers_motion():
    rng = np.random.default_rng(4)
    P = rng.normal(size=(6, 3))
    Q_, _ = np.linalg.qr(rng.normal(size=(3, 3)))
    if np.linalg.det(Q_) < 0:
        Q_[:, 0] *= -1
    t = rng.normal(size=3)
    R, s = fit_isometry(P, P @ Q_.T + t)
    assert np.allclose(R, Q_) and np.allclose(s, t)


def test_placement_seed_reproducible():
    a = gen_lens(5, 1, 1, 11)[1].base
    b = gen_lens(5, 1, 1, 11)[1].base
    assert np.array_equal(a, b)
