"""Built-in triangulations: S^3, S^4, lens spaces L(p, q) and S^1 x S^2."""

from __future__ import annotations

import math
import string

import numpy as np
from scipy.cluster.hierarchy import DisjointSet

from .complex_core import (ComplexError, DeckGroup, Gluing, SimplicialPreComplex,
                           boundary_of_simplex, build_complex, find_face_gluing,
                           orient_consistently)
from .developing import CoverPlacement, Representation, equivariant_placement


class GeneratorError(ValueError):
    def __init__(self, code: str, message: str):
        super().__init__(f"{code}: {message}")
        self.code = code


def gen_sphere3(seed=0):
    """Boundary of a 4-simplex with five generic points in R^3."""
    c = build_complex(3, boundary_of_simplex(range(5)), [str(i) for i in range(1, 6)])
    placement, _ = equivariant_placement(c, Representation("trivial", 3), seed)
    return c, placement


def gen_sphere4(seed=0):
    """Six-vertex S^4 (boundary of a 5-simplex) with six generic points in R^4."""
    c = build_complex(4, boundary_of_simplex(range(6)), list("ABCDEF"))
    placement, _ = equivariant_placement(c, Representation("trivial", 4), seed)
    return c, placement


def check_lens_params(p: int, q: int, k: int):
    if not (p >= 2 and 0 < q < p and math.gcd(p, q) == 1 and 1 <= k < p):
        raise GeneratorError("BAD_PARAMS", f"need 0<q<p, gcd(p,q)=1, 1<=k<p; got p={p} q={q} k={k}")


def lens_quotient(p: int, q: int) -> SimplicialPreComplex:
    """Twisted p-gonal bipyramid: tetrahedra (N, S, v_i, v_{i+1}).

    Copy j of the bipyramid has its face (N, v_i, v_{i+1}) glued to face
    (S, v_{i+q}, v_{i+q+1}) of copy j+1; cover vertices are the classes of
    this identification and the deck group shifts copies.
    """
    names = [("N", j) for j in range(p)] + [("S", j) for j in range(p)] + \
        [(f"v{i}", j) for i in range(p) for j in range(p)]
    ds = DisjointSet(names)
    for j in range(p):
        nxt = (j + 1) % p
        for i in range(p):
            ds.merge(("N", j), ("S", nxt))
            ds.merge((f"v{i}", j), (f"v{(i + q) % p}", nxt))
    classes = {frozenset(s) for s in ds.subsets()}

    def shift_class(cls, s):
        return frozenset((x, (j + s) % p) for x, j in cls)

    # orbits of the deck action on cover vertices
    labels, vertex_names = {}, []
    for cls in sorted(classes, key=lambda s: min(s)):
        if cls in labels:
            continue
        v = len(vertex_names)
        vertex_names.append("n" if any(x in ("N", "S") for x, _ in cls) else "v")
        for s in range(p):
            img = shift_class(cls, s)
            if img in labels:
                raise GeneratorError("BAD_PARAMS", "deck action is not free on vertices")
            labels[img] = (v, s)
    if len(set(vertex_names)) != len(vertex_names):
        vertex_names = [f"{n}{i}" for i, n in enumerate(vertex_names)]

    def lab(x, j):
        return labels[frozenset(ds.subset((x, j)))]

    tops = [(lab("N", 0), lab("S", 0), lab(f"v{i}", 0), lab(f"v{(i + 1) % p}", 0)) for i in range(p)]
    group = DeckGroup(p)
    gluing = {}

    def glue(t1, i1, t2, i2, shift):
        g = find_face_gluing(group, tops, t1, i1, t2, i2, shift=shift)
        if g is None:
            raise ComplexError("NON_MANIFOLD", "lens gluing mismatch")
        gluing[(t1, i1)] = g
        inv = [None] * 4
        for a, b in enumerate(g.perm):
            inv[b] = a
        gluing[(t2, i2)] = Gluing(t1, i1, tuple(inv), -shift)

    for i in range(p):
        # internal face (N, S, v_{i+1}) shared by tetrahedra i and i+1
        glue(i, 2, (i + 1) % p, 3, 0)
        # face (N, v_i, v_{i+1}) of copy 0 -> face (S, v_{i+q}, v_{i+q+1}) of copy 1
        glue(i, 1, (i + q) % p, 0, -1)
    signs = orient_consistently(3, tops, group, gluing)
    return build_complex(3, list(zip(signs, tops)), vertex_names, group, gluing=gluing)


def _lens_sampler(m, d, rng):
    return rng.uniform(1.0, 2.0, size=(m, d))


def gen_lens(p: int, q: int, k: int, seed=0):
    """L(p, q) with generator acting by rotation 2*pi*k/p about the z-axis."""
    check_lens_params(p, q, k)
    c = lens_quotient(p, q)
    rep = Representation("single_axis_cyclic", 3, p, k)
    placement, _ = equivariant_placement(c, rep, seed, sampler=_lens_sampler)
    return c, placement, rep


def s1xs2_quotient() -> SimplicialPreComplex:
    """S^2 x S^1 as the mapping torus of the identity on the tetrahedron boundary.

    Each prism (triangle x [0, 1]) is cut into three tetrahedra by the
    staircase rule; copy 1 of the base is the deck image of copy 0.
    """
    tops = []
    for tri in [(0, 1, 2), (0, 1, 3), (0, 2, 3), (1, 2, 3)]:
        x, y, z = tri
        tops.append(((x, 0), (y, 0), (z, 0), (z, 1)))
        tops.append(((x, 0), (y, 0), (y, 1), (z, 1)))
        tops.append(((x, 0), (x, 1), (y, 1), (z, 1)))
    group = DeckGroup(None)
    signs = orient_consistently(3, tops, group)
    return build_complex(3, list(zip(signs, tops)), list("abcd"), group)


def gen_s1xs2(alpha: float, a: float, seed=0):
    """EXPERIMENTAL: S^1 x S^2 with a screw-motion representation of Z."""
    if a == 0:
        raise GeneratorError("BAD_PARAMS", "translation a must be nonzero")
    c = s1xs2_quotient()
    rep = Representation("cyclic_infinite", 3, alpha=alpha, a=a)

    def sampler(m, d, rng):
        X = rng.uniform(1.0, 2.0, size=(m, d))
        X[:, 2] = rng.uniform(0.0, abs(a), size=m)
        return X

    placement, _ = equivariant_placement(c, rep, seed, sampler=sampler, tol=1e-9)
    placement.gauge_record["alpha_degenerate"] = bool(abs(math.remainder(alpha, 2 * math.pi)) < 1e-6)
    return c, placement, rep


def vertex_name(i: int) -> str:
    letters = string.ascii_uppercase
    return letters[i] if i < 26 else f"V{i}"


def homology_h1(c: SimplicialPreComplex):
    """Integral H_1 of the quotient: (betti_1, torsion coefficients)."""
    from sympy import Matrix, ZZ
    from sympy.matrices.normalforms import smith_normal_form

    E, F = c.n_cells(1), c.n_cells(2)
    d1 = np.zeros((len(c.vertex_names), E), dtype=int)
    for e in range(E):
        a, b = c.cell_labels(1, e)
        d1[b[0], e] += 1
        d1[a[0], e] -= 1
    d2 = np.zeros((E, F), dtype=int)
    for f in range(F):
        t, pos = c.cells[2][f]
        for i in range(3):
            sub = tuple(p for k, p in enumerate(pos) if k != i)
            e, _, parity = c.cell_of[1][(t, sub)]
            d2[e, f] += (-1) ** i * parity
    r1 = np.linalg.matrix_rank(d1)
    snf = smith_normal_form(Matrix(d2.tolist()), domain=ZZ)
    diag = [abs(int(snf[i, i])) for i in range(min(snf.shape)) if snf[i, i] != 0]
    betti = E - r1 - len(diag)
    return betti, [x for x in diag if x > 1]
