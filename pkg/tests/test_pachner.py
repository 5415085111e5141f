import numpy as np
import pytest

from pltorsion.complex_core import build_complex, perm_parity
from pltorsion.developing import Representation, equivariant_placement, read_metric
from pltorsion.metric import deficit_angles
from pltorsion.pachner import (MoveError, Site, apply_move, deviation_form_factor,
                               edge_identity_residuals, find_sites, four_surrounded_edges,
                               move_experiment)
from pltorsion.torsion import compute_invariant


def canonical(c):
    return sorted((int(o) * perm_parity(t), tuple(sorted(t))) for o, t in zip(c.orient, c.tops))


def test_site_counts(sphere3, sphere4):
    c3, _ = sphere3
    assert len(find_sites(c3, "2-3")) == 10
    assert len(find_sites(c3, "1-4")) == 5
    assert len(find_sites(c3, "3-2")) == 10
    assert len(find_sites(c3, "4-1")) == 5
    c4, _ = sphere4
    assert len(find_sites(c4, "3-3")) == 20
    assert len(find_sites(c4, "2-4")) == 15
    assert len(find_sites(c4, "1-5")) == 6


def test_unknown_kind(sphere3):
    with pytest.raises(MoveError):
        find_sites(sphere3[0], "2-4")


def test_2to3_counts(sphere3):
    c, pl = sphere3
    r = apply_move(c, pl, find_sites(c, "2-3")[0], 0)
    assert r.complex.n_tops == 6
    assert r.complex.counts()[1] == 11
    assert r.complex.euler_characteristic() == 0


def test_1to4_adds_vertex(sphere3):
    c, pl = sphere3
    r = apply_move(c, pl, find_sites(c, "1-4")[0], 0)
    assert r.complex.counts() == (6, 14, 16, 8)
    assert r.report["new_vertex"]["name"] not in c.vertex_names


def test_moves_stay_flat(sphere3):
    c, pl = sphere3
    for kind in ("2-3", "1-4"):
        r = apply_move(c, pl, find_sites(c, kind)[2], 1)
        assert np.abs(deficit_angles(r.complex, read_metric(r.complex, r.placement))).max() < 1e-9


def test_3to2_inverts_2to3(sphere3):
    c, pl = sphere3
    r = apply_move(c, pl, find_sites(c, "2-3")[4], 0)
    e = r.created[1][0]
    back = apply_move(r.complex, r.placement, Site("3-2", e), 0)
    assert canonical(back.complex) == canonical(c)


def test_4to2_inverts_2to4():
    from pltorsion.zoo import gen_sphere4
    c, pl = gen_sphere4(2)
    r = apply_move(c, pl, find_sites(c, "2-4")[3], 1)
    back = apply_move(r.complex, r.placement, Site("4-2", r.created[1][0]), 1)
    assert canonical(back.complex) == canonical(c)
    assert np.abs(back.placement.base - pl.base).max() == 0.0


def test_invariant_preserved_on_lens(lens51):
    c, pl, _ = lens51
    trace, applied, c2, _ = move_experiment(c, pl, ["2-3", "3-2", "1-4", "4-1"], 6, seed=5)
    assert len(applied) == 6
    assert np.ptp(trace) / trace[0] < 1e-8
    assert c2.group.order == 5


def test_pillow_collapse_rejected():
    # two copies of one tetrahedron: the 2-3 site has a repeated cluster
    c = build_complex(3, [(1, (0, 1, 2, 3)), (-1, (0, 1, 2, 3))])
    pl, _ = equivariant_placement(c, Representation("trivial", 3), 0)
    for site in find_sites(c, "2-3"):
        with pytest.raises(MoveError):
            apply_move(c, pl, site, 0)


def test_factor_report(sphere4):
    c, pl = sphere4
    r = apply_move(c, pl, find_sites(c, "2-4")[0], 0)
    f = r.report["factor"]
    assert len(f["trials"]) == 4
    for t in f["trials"]:
        assert t["rel_err_ratio"] < 1e-8
        assert t["rel_err_entry"] < 1e-8
    assert f["form_factor"]["rel_err"] < 1e-10


def test_form_factor_independent_of_omitted_vertex_and_basis(sphere4):
    c, pl = sphere4
    r = apply_move(c, pl, find_sites(c, "2-4")[5], 3)
    e = r.created[1][0]
    Q, _ = np.linalg.qr(np.random.default_rng(0).normal(size=(3, 3)))
    vals = [deviation_form_factor(r.complex, r.placement, e, omit=k)["rel_err"] for k in range(4)]
    vals.append(deviation_form_factor(r.complex, r.placement, e, rotation=Q)["rel_err"])
    assert max(vals) < 1e-10


def test_edge_identities_after_move(sphere4):
    c, pl = sphere4
    r = apply_move(c, pl, find_sites(c, "3-3")[0], 0)
    edges = four_surrounded_edges(r.complex)
    assert edges
    for e in edges:
        res = edge_identity_residuals(r.complex, r.placement, e)
        assert res["annihilation"] < 1e-10
        assert res["rank"] == 3
        assert res["proportion"] < 1e-8


def test_wrong_link(sphere4):
    c, pl = sphere4
    r = apply_move(c, pl, find_sites(c, "2-4")[0], 0)
    busy = [e for e in range(r.complex.n_cells(1)) if len(r.complex.slots[1][e]) != 4]
    with pytest.raises(MoveError) as exc:
        deviation_form_factor(r.complex, r.placement, busy[0])
    assert exc.value.code == "WRONG_LINK"


def test_curvature_guard(lens51):
    c, pl, _ = lens51
    inv = compute_invariant(c, pl).invariant
    r = apply_move(c, pl, find_sites(c, "1-4")[0], np.random.default_rng(0))
    assert compute_invariant(r.complex, r.placement).invariant == pytest.approx(inv, rel=1e-8)
