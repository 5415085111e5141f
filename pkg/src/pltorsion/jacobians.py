"""Linear maps of the acyclic sequences and a finite-difference oracle.

3D works in plain edge lengths ``l`` (matrix ``A = d omega / d l`` and
``B = d l / d x``); 4D works in squared lengths ``L`` (``Q4 = d omega / d L``)
and edge deviations (``D4 = d S / d v``).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .complex_core import SimplicialPreComplex
from .developing import CoverPlacement, GaugeBasis, drot_z
from .metric import (MetricData, dihedral_gradient_coords, dihedral_gradient_sq, hinge_slots,
                     local_edges)

RANK_RTOL = 1e-8


@dataclass
class JacobianSet:
    matrices: dict = field(default_factory=dict)
    rows: dict = field(default_factory=dict)
    cols: dict = field(default_factory=dict)

    def add(self, name, M, rows, cols):
        self.matrices[name] = M
        self.rows[name] = list(rows)
        self.cols[name] = list(cols)

    def to_dict(self) -> dict:
        return {name: {"rows": self.rows[name], "cols": self.cols[name],
                       "data": np.asarray(M).tolist()} for name, M in self.matrices.items()}


def deficit_jacobian(c: SimplicialPreComplex, m: MetricData, absolute: bool = False,
                     placement: CoverPlacement | None = None) -> np.ndarray:
    """``d omega_h / d L_e`` for every hinge h and edge e (squared lengths).

    With ``absolute=True`` the per-simplex contributions are summed in
    absolute value; the result sets the scale against which cancellation
    to zero is judged.  With a ``placement`` the per-simplex derivatives are
    evaluated from coordinates (better conditioned on thin simplices).
    """
    d = c.dim
    out = np.zeros((c.n_cells(d - 2), c.n_cells(1)))
    pairs = local_edges(d + 1)
    for t, row in enumerate(hinge_slots(c)):
        if placement is None:
            _, dtheta = dihedral_gradient_sq(m.local_sq(c, t))
        else:
            _, dtheta = dihedral_gradient_coords(placement.top_coords(c, t))
        edges = c.top_edges(t)
        cols = [edges[pr] for pr in pairs]
        for p, q, h in row:
            contrib = m.eps[t] * dtheta[p, q]
            if absolute:
                contrib = np.abs(contrib)
            np.add.at(out[h], cols, contrib)
    return out


def assemble_A3(c: SimplicialPreComplex, m: MetricData, absolute: bool = False,
                placement: CoverPlacement | None = None) -> np.ndarray:
    """``A[a, b] = d omega_a / d l_b`` with plain lengths ``l = sqrt(L)``."""
    if c.dim != 3:
        raise ValueError("A is defined for 3-dimensional complexes")
    return deficit_jacobian(c, m, absolute, placement) * (2.0 * np.sqrt(m.L))[None, :]


def assemble_Q4(c: SimplicialPreComplex, m: MetricData, absolute: bool = False,
                placement: CoverPlacement | None = None) -> np.ndarray:
    """``(d omega_i / d L_a)``: rows are 2-faces, columns edges."""
    if c.dim != 4:
        raise ValueError("Q4 is defined for 4-dimensional complexes")
    return deficit_jacobian(c, m, absolute, placement)


def conjugate_Omega_map(Q4: np.ndarray) -> np.ndarray:
    """``(d Omega_a / d S_i)``: edges x faces, the transpose of ``Q4``."""
    return np.asarray(Q4).T


def lift_velocity(placement: CoverPlacement, label, column) -> np.ndarray:
    """Velocity of a lifted vertex along one gauge column."""
    v, j = label
    rep = placement.rep
    d = placement.base.shape[1]
    if column[0] == "vertex":
        if column[1] != v:
            return np.zeros(d)
        R, _ = rep.isometry(j)
        return R @ column[2]
    if column[0] == "alpha":
        return j * drot_z(j * rep.alpha, d) @ placement.base[v]
    if column[0] == "shift":
        out = np.zeros(d)
        out[2] = j
        return out
    raise ValueError(column)


def length_jacobian(c: SimplicialPreComplex, placement: CoverPlacement, basis: GaugeBasis,
                    squared: bool = False) -> np.ndarray:
    """``d l_e / d (gauge parameter)``; with ``squared`` the derivative of ``L_e``."""
    B = np.zeros((c.n_cells(1), len(basis)))
    for e in range(c.n_cells(1)):
        la, lb = c.cell_labels(1, e)
        xa, xb = placement.lift(la), placement.lift(lb)
        diff = xa - xb
        length = np.linalg.norm(diff)
        for j, col in enumerate(basis.columns):
            dv = lift_velocity(placement, la, col) - lift_velocity(placement, lb, col)
            B[e, j] = 2 * diff @ dv if squared else diff @ dv / length
    return B


def assemble_B3(c: SimplicialPreComplex, placement: CoverPlacement, basis: GaugeBasis) -> np.ndarray:
    if c.dim != 3:
        raise ValueError("B is defined for 3-dimensional complexes")
    return length_jacobian(c, placement, basis)


# ---------------------------------------------------------------- deviations

@dataclass
class DeviationBasis:
    """Per edge: unit direction and an orthonormal triple orthogonal to it."""

    direction: np.ndarray  # (E, 4)
    triples: np.ndarray  # (E, 4, 3), columns span the orthogonal complement


def orthonormal_complement(u: np.ndarray) -> np.ndarray:
    """Gram-Schmidt of the coordinate axes least aligned with ``u``."""
    u = u / np.linalg.norm(u)
    d = len(u)
    basis = [u]
    for a in np.argsort(np.abs(u), kind="stable"):
        w = np.eye(d)[a]
        for b in basis:
            w = w - (w @ b) * b
        basis.append(w / np.linalg.norm(w))
        if len(basis) == d:
            break
    return np.column_stack(basis[1:])


def deviation_basis(c: SimplicialPreComplex, placement: CoverPlacement) -> DeviationBasis:
    E = c.n_cells(1)
    d = c.dim
    dirs = np.zeros((E, d))
    triples = np.zeros((E, d, d - 1))
    for e in range(E):
        a, b = placement.lifts(c.cell_labels(1, e))
        u = (b - a) / np.linalg.norm(b - a)
        dirs[e] = u
        triples[e] = orthonormal_complement(u)
    return DeviationBasis(dirs, triples)


def triangle_area(P) -> float:
    P = np.asarray(P, float)
    u, w = P[1] - P[0], P[2] - P[0]
    return 0.5 * np.sqrt(max((u @ u) * (w @ w) - (u @ w) ** 2, 0.0))


def triangle_area_gradient(P, i: int) -> np.ndarray:
    """Gradient of the area of triangle ``P`` with respect to vertex ``i``."""
    P = np.asarray(P, float)
    j, k = [x for x in range(3) if x != i]
    u = P[k] - P[j]
    w = P[i] - P[j]
    h = w - (w @ u) / (u @ u) * u
    return 0.5 * np.linalg.norm(u) * h / np.linalg.norm(h)


FACE_EDGES = ((0, 1), (0, 2), (1, 2))


def midpoint_triangle(P):
    """Midpoints of the sides of triangle ``P`` in ``FACE_EDGES`` order."""
    P = np.asarray(P, float)
    return np.array([(P[i] + P[j]) / 2 for i, j in FACE_EDGES])


def midpoint_area_change(P, deviations) -> float:
    """Area differential generated by finite edge deviations of triangle ``P``.

    ``deviations[k]`` moves the midpoint of side ``FACE_EDGES[k]``; the result
    is four times the deviated midpoint-triangle area minus the area of P.
    """
    Mid = midpoint_triangle(P) + np.asarray(deviations, float)
    return 4 * triangle_area(Mid) - triangle_area(P)


def face_edge_cells(c: SimplicialPreComplex, f: int) -> list:
    t, pos = c.cells[2][f]
    return [c.local_cell(t, (pos[i], pos[j])) for i, j in FACE_EDGES]


def assemble_D4(c: SimplicialPreComplex, placement: CoverPlacement,
                basis: DeviationBasis | None = None) -> np.ndarray:
    """``(d S_i / d v)``: rows 2-faces, columns three deviation components per edge."""
    if c.group.order != 1:
        raise ValueError("edge deviations are implemented for trivial deck groups")
    basis = basis or deviation_basis(c, placement)
    k = basis.triples.shape[2]
    D = np.zeros((c.n_cells(2), k * c.n_cells(1)))
    for f in range(c.n_cells(2)):
        P = placement.lifts(c.cell_labels(2, f))
        Mid = midpoint_triangle(P)
        for slot, e in enumerate(face_edge_cells(c, f)):
            grad = 4 * triangle_area_gradient(Mid, slot)
            D[f, k * e:k * (e + 1)] += grad @ basis.triples[e]
    return D


def face_areas(c: SimplicialPreComplex, placement: CoverPlacement) -> np.ndarray:
    return np.array([triangle_area(placement.lifts(c.cell_labels(2, f))) for f in range(c.n_cells(2))])


def area_sq_response(c, placement, basis=None) -> np.ndarray:
    """``d(S_i^2) / d v`` = 2 S_i dS_i/dv."""
    return 2 * face_areas(c, placement)[:, None] * assemble_D4(c, placement, basis)


# ---------------------------------------------------------------- numerics

def fd_oracle(f, x0, h: float = 1e-4):
    """Central-difference gradient with one Richardson step.

    ``f`` maps a 1-D parameter array to a scalar or array.  Returns
    ``(jac, err)`` where ``jac[..., j]`` is the derivative along parameter j
    and ``err`` the difference between the extrapolated and half-step values.
    """
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    cols, errs = [], []
    for j in range(len(x0)):
        e = np.zeros_like(x0)
        e[j] = 1.0

        def cd(step):
            return (np.asarray(f(x0 + step * e)) - np.asarray(f(x0 - step * e))) / (2 * step)

        d1, d2 = cd(h), cd(h / 2)
        rich = (4 * d2 - d1) / 3
        cols.append(rich)
        errs.append(np.abs(rich - d2))
    return np.stack(cols, axis=-1), np.stack(errs, axis=-1)


def numerical_rank(M, rtol: float = RANK_RTOL, scale: float | None = None):
    """Rank by relative singular-value threshold, plus the gap across it.

    ``scale`` (if given) replaces the largest singular value as reference, for
    matrices that are sums of cancelling contributions.
    """
    M = np.asarray(M, float)
    if M.size == 0:
        return 0, np.array([]), np.inf
    s = np.linalg.svd(M, compute_uv=False)
    ref = max(s[0], scale or 0.0)
    if ref == 0:
        return 0, s, np.inf
    r = int((s > rtol * ref).sum())
    if r == len(s):
        gap = np.inf
    elif r == 0:
        gap = ref / max(s[0], np.finfo(float).tiny)
    else:
        gap = s[r - 1] / max(s[r], np.finfo(float).tiny)
    return r, s, gap


def rel_max(X, scale) -> float:
    scale = float(scale)
    return float(np.abs(X).max() / scale) if scale > 0 else float(np.abs(X).max())


def sq_lengths_of(c: SimplicialPreComplex, placement: CoverPlacement) -> np.ndarray:
    return np.array([float(((placement.lift(a) - placement.lift(b)) ** 2).sum())
                     for a, b in (c.cell_labels(1, e) for e in range(c.n_cells(1)))])


def faces_containing_edge(c: SimplicialPreComplex, e: int) -> list:
    return [f for f in range(c.n_cells(2)) if e in face_edge_cells(c, f)]


def edge_link_vertices(c: SimplicialPreComplex, e: int):
    """Tops around edge ``e`` and the labels of their vertices off the edge.

    Only meaningful for trivial deck groups (labels are global vertices).
    """
    a, b = c.cell_labels(1, e)
    tops = c.cofaces_top(1, e)
    link = sorted({l for t in tops for l in c.tops[t]} - {a, b})
    return a, b, tops, link



def simplex_deviation_block(P, basis=None) -> np.ndarray:
    """3x3 block of d(S^2) for faces ABC, ABD, ABE of one 4-simplex ``P``.

    Columns are the deviation components of edge AB = (P[0], P[1]) along
    ``basis`` (default: Gram-Schmidt complement of AB).
    """
    P = np.asarray(P, float)
    if basis is None:
        basis = orthonormal_complement(P[1] - P[0])
    J = np.zeros((3, basis.shape[1]))
    for r, x in enumerate((2, 3, 4)):
        tri = P[[0, 1, x]]
        grad = 4 * triangle_area_gradient(midpoint_triangle(tri), 0)
        J[r] = 2 * triangle_area(tri) * grad @ basis
    return J


def simplex_deviation_identity(P) -> tuple:
    """``(|det J|, 24 |V| L_AB^(5/2))`` for one 4-simplex."""
    from .metric import signed_volume

    P = np.asarray(P, float)
    L = float(((P[1] - P[0]) ** 2).sum())
    return abs(np.linalg.det(simplex_deviation_block(P))), 24 * abs(signed_volume(P)) * L ** 2.5


def adaptive_fd(f, x0, h: float, scale: float, target: float = 1e-8, shrink: int = 5):
    """``fd_oracle`` with the step cut by 10 until the Richardson error estimate
    falls below ``target * scale`` (thin simplices need short steps)."""
    from .metric import GeometryError

    best = None
    for _ in range(shrink):
        try:
            J, err = fd_oracle(f, x0, h)
        except GeometryError:
            h /= 10
            continue
        e = float(np.abs(err).max())
        if best is None or e < best[1]:
            best = (J, e)
        if e <= target * scale:
            break
        h /= 10
    if best is None:
        raise ValueError("no finite-difference step keeps the simplices realizable")
    return best[0]


def fd_check(c: SimplicialPreComplex, placement: CoverPlacement, h: float = 1e-5) -> dict:
    """Relative deviation of each analytic Jacobian from the finite-difference oracle.

    Errors are normalized by the largest analytic entry (for the deficit maps,
    by the absolute-contribution scale, the natural size of a cancelling sum).
    """
    from .developing import gauge_basis, perturb_placement, read_metric
    from .metric import deficit_angles

    m = read_metric(c, placement)
    out = {}
    if c.dim == 3:
        A = assemble_A3(c, m, placement=placement)
        scale = np.abs(assemble_A3(c, m, absolute=True, placement=placement)).max()
        l0 = np.sqrt(m.L)
        J = adaptive_fd(lambda l: deficit_angles(c, MetricData(l ** 2, m.eps)), l0, h * l0.mean(), scale)
        out["A"] = rel_max(J - A, scale)
        basis = gauge_basis(placement)
        B = assemble_B3(c, placement, basis)
        J = np.zeros_like(B)
        for j in range(len(basis)):
            def lengths(x, j=j):
                return np.sqrt(sq_lengths_of(c, perturb_placement(placement, basis, j, float(x[0]))))
            J[:, j] = fd_oracle(lengths, [0.0], h)[0][:, 0]
        out["B"] = rel_max(J - B, np.abs(B).max())
    else:
        Q = assemble_Q4(c, m, placement=placement)
        scale = np.abs(assemble_Q4(c, m, absolute=True, placement=placement)).max()
        J = adaptive_fd(lambda L: deficit_angles(c, MetricData(L, m.eps)), m.L, h * m.L.mean(), scale)
        out["Q4"] = rel_max(J - Q, scale)
        if c.group.order == 1:
            basis = deviation_basis(c, placement)
            D = assemble_D4(c, placement, basis)
            k = basis.triples.shape[2]
            tris = [placement.lifts(c.cell_labels(2, f)) for f in range(c.n_cells(2))]
            edges = [face_edge_cells(c, f) for f in range(c.n_cells(2))]

            def areas(v):
                v = v.reshape(-1, k)
                return np.array([4 * triangle_area(midpoint_triangle(P) +
                                                   np.array([basis.triples[e] @ v[e] for e in es]))
                                 for P, es in zip(tris, edges)])

            scale_len = np.sqrt(m.L.mean())
            J, _ = fd_oracle(areas, np.zeros(D.shape[1]), h * scale_len)
            out["D4"] = rel_max(J - D, np.abs(D).max())
    return out
