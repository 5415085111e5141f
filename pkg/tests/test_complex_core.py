import itertools

import numpy as np
import pytest

from pltorsion.complex_core import (ComplexError, DeckGroup, boundary_of_simplex, build_complex,
                                    perm_parity)
from pltorsion.zoo import lens_quotient


def test_perm_parity():
    assert perm_parity([0, 1, 2]) == 1
    assert perm_parity([1, 0, 2]) == -1
    assert perm_parity([2, 0, 1]) == 1


def test_boundary_of_4_simplex_counts():
    c = build_complex(3, boundary_of_simplex(range(5)), [str(i) for i in range(1, 6)])
    assert c.counts() == (5, 10, 10, 5)
    assert c.euler_characteristic() == 0


def test_boundary_of_5_simplex_counts():
    c = build_complex(4, boundary_of_simplex(range(6)), list("ABCDEF"))
    assert c.counts() == (6, 15, 20, 15, 6)
    assert c.euler_characteristic() == 2


def test_pillow_is_accepted():
    c = build_complex(3, [(1, (0, 1, 2, 3)), (-1, (0, 1, 2, 3))])
    assert c.counts() == (4, 6, 4, 2)
    for f in range(4):
        assert sorted(c.cofaces_top(2, f)) == [0, 1]


def test_every_codim1_face_has_two_slots():
    c = build_complex(4, boundary_of_simplex(range(6)))
    assert all(len(s) == 2 for s in c.slots[3])


def test_bad_arity():
    with pytest.raises(ComplexError) as e:
        build_complex(3, [(1, (0, 1, 2))])
    assert e.value.code == "BAD_ARITY"
    with pytest.raises(ComplexError):
        build_complex(3, [])


def test_non_manifold():
    tops = boundary_of_simplex(range(5))[:-1]
    with pytest.raises(ComplexError) as e:
        build_complex(3, tops)
    assert e.value.code == "NON_MANIFOLD"


def test_orientation_clash():
    tops = boundary_of_simplex(range(5))
    s, t = tops[0]
    tops[0] = (-s, t)
    with pytest.raises(ComplexError) as e:
        build_complex(3, tops)
    assert e.value.code == "ORIENTATION_CLASH"


def test_hinge_cycle_lengths_sphere3():
    c = build_complex(3, boundary_of_simplex(range(5)), [str(i) for i in range(1, 6)])
    e12 = c.find_cells([(0, 0), (1, 0)])
    assert len(e12) == 1
    cyc = c.hinge_cycle(e12[0])
    assert len(cyc) == 3
    assert {t for t, _, _ in cyc} == set(c.cofaces_top(1, e12[0]))
    for h in range(c.n_cells(1)):
        assert len(c.hinge_cycle(h)) == len(c.slots[1][h])


def test_hinge_cycle_sphere4():
    c = build_complex(4, boundary_of_simplex(range(6)), list("ABCDEF"))
    for h in range(c.n_cells(2)):
        assert len(c.hinge_cycle(h)) == 3
    # every edge lies in exactly four 4-simplices
    assert all(len(s) == 4 for s in c.slots[1])


def test_cell_lookup_by_labels():
    c = build_complex(3, [(1, (0, 1, 2, 3)), (-1, (0, 1, 2, 3))])
    assert len(c.find_cells([(0, 0), (1, 0), (2, 0)])) == 1


def test_lens_quotient_pre_complex():
    c = lens_quotient(5, 2)
    assert c.counts() == (2, 7, 10, 5)
    assert c.euler_characteristic() == 0
    assert c.group == DeckGroup(5)


def test_deck_key_is_shift_invariant():
    g = DeckGroup(5)
    labels = [(0, 1), (1, 3), (2, 4)]
    for s in range(5):
        assert g.key([g.shift(l, s) for l in labels]) == g.key(labels)
    z = DeckGroup(None)
    assert z.key([(0, 3), (1, 5)]) == z.key([(0, -1), (1, 1)])


def test_copy_roundtrip():
    c = lens_quotient(3, 1)
    d = c.copy()
    assert d.counts() == c.counts()
    assert d.tops == c.tops
    assert np.array_equal(d.orient, c.orient)


def test_induced_orientations_opposite():
    c = build_complex(4, boundary_of_simplex(range(6)))
    for (t, i), g in c.gluing.items():
        s1 = (-1) ** i * c.orient[t]
        s2 = (-1) ** g.pos2 * c.orient[g.top2]
        parity = perm_parity([g.perm[p] for p in range(5) if p != i])
        assert s1 * parity == -s2
