"""Bistellar (Pachner) moves on metric pre-complexes and their factor laws.

A move is described by the common face ``P`` of its before-cluster: the
cluster is the star of ``P`` (``d + 2 - |P|`` top simplices), the vertex set
``W`` of the cluster has ``d + 2`` cover vertices, and the after-cluster
consists of the simplices ``W - {p}`` for ``p`` in ``P``.  For vertex-adding
moves ``P`` is a whole top simplex and ``W`` gains a new vertex.
"""

from __future__ import annotations

import logging
import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .complex_core import (ComplexError, Gluing, SimplicialPreComplex, build_complex,
                           find_face_gluing, perm_parity)
from .developing import CoverPlacement, read_metric
from .jacobians import area_sq_response, assemble_Q4, numerical_rank, triangle_area
from .metric import deficit_angles, signed_volume, simplex_degenerate

log = logging.getLogger(__name__)

# kind -> (dimension, size of the common face P)
MOVES = {
    "2-3": (3, 3), "3-2": (3, 2), "1-4": (3, 4), "4-1": (3, 1),
    "3-3": (4, 3), "2-4": (4, 4), "4-2": (4, 2), "1-5": (4, 5), "5-1": (4, 1),
}
MAX_RESAMPLE = 100
SHRINK = 0.8


class MoveError(ValueError):
    def __init__(self, code: str, message: str):
        super().__init__(f"{code}: {message}")
        self.code = code


@dataclass
class Site:
    kind: str
    cell: int  # id of the common face P (dimension |P| - 1)

    def to_dict(self):
        return {"kind": self.kind, "cell": self.cell}


@dataclass
class MoveResult:
    complex: SimplicialPreComplex
    placement: CoverPlacement
    report: dict
    cell_map: list  # cell_map[k][old id] -> new id or None
    created: list  # created[k] = new cell ids not coming from old cells
    W: list = field(default_factory=list)  # new-complex labels of the cluster vertices
    P: list = field(default_factory=list)
    Q: list = field(default_factory=list)


def _check_kind(c: SimplicialPreComplex, kind: str):
    if kind not in MOVES:
        raise MoveError("BAD_KIND", f"unknown move {kind}")
    if MOVES[kind][0] != c.dim:
        raise MoveError("BAD_KIND", f"move {kind} does not apply in dimension {c.dim}")


def find_sites(c: SimplicialPreComplex, kind: str) -> list:
    """Cells whose star has the before-pattern of ``kind`` (combinatorial only)."""
    _check_kind(c, kind)
    d, size_p = MOVES[kind]
    star = d + 2 - size_p
    k = size_p - 1
    return [Site(kind, cell) for cell in range(c.n_cells(k)) if len(c.slots[k][cell]) == star]


def _add(group, s, ds):
    return s + ds if group.order is None else (s + ds) % group.order


def _cluster(c: SimplicialPreComplex, k: int, cell: int):
    """Star of a k-cell as cover tops ``(t, shift)``, with P in cluster-frame labels."""
    d = c.dim
    t0, P0 = c.slots[k][cell][0]
    P = [c.tops[t0][p] for p in P0]
    seen = {(t0, 0): tuple(P0)}
    order = [(t0, 0)]
    queue = deque([(t0, 0, tuple(P0))])
    while queue:
        t, s, ppos = queue.popleft()
        for i in range(d + 1):
            if i in ppos:
                continue
            g = c.gluing[(t, i)]
            key = (g.top2, _add(c.group, s, -g.shift))
            if key not in seen:
                seen[key] = tuple(g.perm[p] for p in ppos)
                order.append(key)
                queue.append((key[0], key[1], seen[key]))
    return P, order


def _shifted(c, t, s):
    return tuple(c.group.shift(l, s) for l in c.tops[t])


def apply_move(c: SimplicialPreComplex, placement: CoverPlacement, site: Site, rng=None,
               curv_tol: float = 1e-9) -> MoveResult:
    """Rewrite the complex at ``site``; new vertices are sampled inside the cluster image."""
    _check_kind(c, site.kind)
    rng = np.random.default_rng(rng)
    d, size_p = MOVES[site.kind]
    k = size_p - 1
    star = d + 2 - size_p
    if len(c.slots[k][site.cell]) != star:
        raise MoveError("DEGENERATE_SITE", f"cell {site.cell} has a star of the wrong size")
    P, cluster = _cluster(c, k, site.cell)
    tops_in = [t for t, _ in cluster]
    if len(cluster) != star or len(set(tops_in)) != star:
        raise MoveError("DEGENERATE_SITE", "star of the common face repeats a top simplex")
    shift_of = dict(cluster)
    adding = size_p == d + 1
    names = list(c.vertex_names)
    base = placement.base.copy()
    if adding:
        new_v = len(names)
        names.append(_fresh_name(names))
        new_label = (new_v, 0)
        W = list(P) + [new_label]
    else:
        labels = set()
        for t, s in cluster:
            labels.update(_shifted(c, t, s))
        if len(labels) != d + 2:
            raise MoveError("DEGENERATE_SITE", f"cluster spans {len(labels)} cover vertices, need {d + 2}")
        W = list(P) + sorted(labels - set(P))
    Q = [w for w in W if w not in P]

    # the link of P must be the boundary of Q: every cluster top misses a distinct q
    missing_all = [next(w for w in W if w not in _shifted(c, t, s)) for t, s in cluster]
    if len(set(missing_all)) != len(cluster):
        raise MoveError("DEGENERATE_SITE", "two cluster simplices span the same vertices")

    # orientation: the before-cluster is a signed part of the boundary of W
    g_sign = None
    for t, s in cluster:
        T = _shifted(c, t, s)
        missing = [w for w in W if w not in T]
        parity = perm_parity([W.index(x) for x in T])
        g = int(c.orient[t]) * parity * (-1) ** W.index(missing[0])
        if g_sign is None:
            g_sign = g
        elif g != g_sign:
            raise MoveError("DEGENERATE_SITE", "cluster is not consistently oriented")
    after = [(-g_sign * (-1) ** W.index(p), tuple(w for w in W if w != p)) for p in P]

    kept = [t for t in range(c.n_tops) if t not in shift_of]
    new_index = {t: i for i, t in enumerate(kept)}
    new_tops = [c.tops[t] for t in kept] + [a[1] for a in after]
    new_orient = [int(c.orient[t]) for t in kept] + [a[0] for a in after]
    first_after = len(kept)

    # boundary faces of the cluster: face of (t, s) opposite a P-vertex x
    bmap = {}
    for t, s in cluster:
        T = _shifted(c, t, s)
        q_t = [w for w in W if w not in T][0]
        for i, x in enumerate(T):
            if x in P:
                a = first_after + P.index(x)
                j = new_tops[a].index(q_t)
                bmap[(t, i)] = (a, j, s)
    gluing = {}

    def set_pair(t1, i1, t2, i2, shift):
        g = find_face_gluing(c.group, new_tops, t1, i1, t2, i2, shift=shift)
        if g is None:
            raise MoveError("DEGENERATE_SITE", "face labels do not match after rewriting")
        gluing[(t1, i1)] = g
        inv = [None] * (d + 1)
        for a_, b_ in enumerate(g.perm):
            inv[b_] = a_
        gluing[(t2, i2)] = Gluing(t1, i1, tuple(inv), -g.shift)

    for t in kept:
        for i in range(d + 1):
            g = c.gluing[(t, i)]
            if g.top2 in new_index:
                gluing[(new_index[t], i)] = Gluing(new_index[g.top2], g.pos2, g.perm, g.shift)
            else:
                a, j, s2 = bmap[(g.top2, g.pos2)]
                set_pair(new_index[t], i, a, j, _add(c.group, g.shift, s2))
    for (t, i), (a, j, s) in bmap.items():
        g = c.gluing[(t, i)]
        if g.top2 not in shift_of or (g.top2, g.pos2) < (t, i):
            continue
        a2, j2, s2 = bmap[(g.top2, g.pos2)]
        shift = _add(c.group, g.shift, s2 - s)
        if shift == 0:
            raise MoveError("DEGENERATE_SITE", "cluster boundary is glued to itself")
        set_pair(a, j, a2, j2, shift)
    for ia in range(len(P)):
        for ib in range(ia + 1, len(P)):
            a, b = first_after + ia, first_after + ib
            set_pair(a, new_tops[a].index(P[ib]), b, new_tops[b].index(P[ia]), 0)

    # geometry
    tries = MAX_RESAMPLE if adding else 1
    for attempt in range(tries):
        if adding:
            pts = placement.lifts(P)
            bary = pts.mean(0)
            w = rng.dirichlet(np.ones(len(P)))
            base_new = np.vstack([base, bary + SHRINK * (w @ pts - bary)])
            new_pl = CoverPlacement(placement.rep, base_new, dict(placement.gauge_record))
        else:
            new_pl = placement
        if not any(simplex_degenerate(new_pl.lifts(a[1])) for a in after):
            break
    else:
        if adding:
            raise MoveError("RESAMPLE_EXHAUSTED", "no non-degenerate position for the new vertex")
        raise MoveError("DEGENERATE_SITE", "after-cluster contains a degenerate simplex")

    removed_vertex = None
    if size_p == 1:
        removed_vertex = P[0][0]
    try:
        new_c, new_pl = _rebuild(c, d, names, new_tops, new_orient, gluing, new_pl, removed_vertex)
    except ComplexError as exc:
        raise MoveError("DEGENERATE_SITE", f"rewritten complex invalid ({exc})") from exc
    m = read_metric(new_c, new_pl)
    omega = np.abs(deficit_angles(new_c, m)).max()
    if omega > curv_tol:
        raise MoveError("DEGENERATE_SITE", f"curvature {omega:.3e} after move")

    relabel = _vertex_relabel(len(names), removed_vertex)
    W_new = [(relabel[v], j) for v, j in W if relabel.get(v) is not None]
    P_new = [(relabel[v], j) for v, j in P if relabel.get(v) is not None]
    Q_new = [(relabel[v], j) for v, j in Q if relabel.get(v) is not None]
    cell_map, created = _map_cells(c, new_c, new_index, shift_of, W, P, first_after, relabel)
    report = {"kind": site.kind, "site": site.cell, "removed_tops": len(cluster),
              "added_tops": len(after), "max_abs_omega": float(omega),
              "created": [len(x) for x in created]}
    if adding:
        report["new_vertex"] = {"name": names[-1], "coords": new_pl.base[-1].tolist()}
    res = MoveResult(new_c, new_pl, report, cell_map, created, W_new, P_new, Q_new)
    if site.kind == "2-4" and c.group.order == 1:
        report["factor"] = factor_report_2to4(c, placement, res)
    return res


def _fresh_name(names):
    i = len(names)
    while f"w{i}" in names:
        i += 1
    return f"w{i}"


def _vertex_relabel(n, removed):
    out, j = {}, 0
    for v in range(n):
        if v == removed:
            out[v] = None
        else:
            out[v] = j
            j += 1
    return out


def _rebuild(c, d, names, tops, orient, gluing, placement, removed):
    if removed is not None:
        relabel = _vertex_relabel(len(names), removed)
        tops = [tuple((relabel[v], j) for v, j in top) for top in tops]
        names = [n for v, n in enumerate(names) if v != removed]
        base = np.delete(placement.base, removed, axis=0)
        placement = CoverPlacement(placement.rep, base, dict(placement.gauge_record))
        gluing = {key: Gluing(g.top2, g.pos2, g.perm, g.shift) for key, g in gluing.items()}
    new_c = build_complex(d, list(zip(orient, tops)), names, c.group, gluing=gluing)
    return new_c, placement


def _map_cells(c, new_c, new_index, shift_of, W, P, first_after, relabel):
    """Old cell id -> new cell id for cells that survive the move."""
    d = c.dim
    cell_map, created = [], []
    for k in range(d + 1):
        mp = [None] * c.n_cells(k)
        for cell in range(c.n_cells(k)):
            for t, pos in c.slots[k][cell]:
                if t in new_index:
                    mp[cell] = new_c.local_cell(new_index[t], pos)
                    break
            if mp[cell] is None:
                for t, pos in c.slots[k][cell]:
                    labs = {c.group.shift(c.tops[t][p], shift_of[t]) for p in pos}
                    if set(P) <= labs:
                        continue
                    for ia, x in enumerate(P):
                        if x in labs:
                            continue
                        a = first_after + ia
                        top = [w for w in W if w != x]
                        mp[cell] = new_c.local_cell(a, [top.index(l) for l in labs])
                        break
                    if mp[cell] is not None:
                        break
        cell_map.append(mp)
        images = {x for x in mp if x is not None}
        created.append([x for x in range(new_c.n_cells(k)) if x not in images])
    return cell_map, created


# ---------------------------------------------------------------- factor laws

def full_pivot_sets(M, r: int):
    """Rows and columns chosen by r steps of complete-pivoting elimination."""
    S = np.array(M, dtype=float)
    rows, cols = list(range(S.shape[0])), list(range(S.shape[1]))
    R, C = [], []
    for _ in range(r):
        sub = np.abs(S[np.ix_(rows, cols)])
        i, j = np.unravel_index(np.argmax(sub), sub.shape)
        pi, pj = rows[i], cols[j]
        R.append(pi)
        C.append(pj)
        rows.remove(pi)
        cols.remove(pj)
        if rows and cols:
            S[np.ix_(rows, cols)] -= np.outer(S[rows, pj], S[pi, cols]) / S[pi, pj]
    return sorted(R), sorted(C)


def _face_with_labels(c, labels):
    target = set(labels)
    for f in range(c.n_cells(2)):
        if set(c.cell_labels(2, f)) == target:
            yield f


def _simplex_volume(placement, labels):
    return signed_volume(placement.lifts(labels))


def factor_report_2to4(before: SimplicialPreComplex, before_pl: CoverPlacement,
                       res: MoveResult) -> dict:
    """Measured det-ratio of the Q4 pivot block vs the closed form for d omega_ABF / d L_AB."""
    c, pl = res.complex, res.placement
    A_, B_ = res.Q
    Pl = list(res.P)
    Q_old = assemble_Q4(before, read_metric(before, before_pl), placement=before_pl)
    scale_old = np.abs(assemble_Q4(before, read_metric(before, before_pl), absolute=True,
                                   placement=before_pl)).max()
    r = numerical_rank(Q_old, scale=scale_old)[0]
    D_rows, C_cols = full_pivot_sets(Q_old, r)
    sign_b, log_b = np.linalg.slogdet(Q_old[np.ix_(D_rows, C_cols)]) if r else (1.0, 0.0)
    m = read_metric(c, pl)
    Q_new = assemble_Q4(c, m, placement=pl)
    ab = [e for e in res.created[1] if set(c.cell_labels(1, e)) == {A_, B_}]
    if len(ab) != 1:
        raise MoveError("WRONG_LINK", "could not identify the new edge AB")
    ab = ab[0]
    W = res.W

    def vol(missing):
        return abs(_simplex_volume(pl, [w for w in W if w != missing]))

    trials = []
    for F in Pl:
        others = [x for x in Pl if x != F]
        abf = [f for f in res.created[2] if set(c.cell_labels(2, f)) == {A_, B_, F}][0]
        rows = [res.cell_map[2][i] for i in D_rows] + [abf]
        cols = [res.cell_map[1][j] for j in C_cols] + [ab]
        sign_a, log_a = np.linalg.slogdet(Q_new[np.ix_(rows, cols)])
        measured = sign_a * sign_b * math.exp(log_a - log_b)
        q = Q_new[abf, ab]
        S_abf = triangle_area(pl.lifts([A_, B_, F]))
        predicted = S_abf / 24 * vol(A_) * vol(B_) / (vol(others[0]) * vol(others[1]) * vol(others[2]))
        trials.append({
            "F": c.cell_name(0, F[0]) if c.group.order == 1 else str(F),
            "measured_ratio": measured, "dOmega_ABF_dL_AB": q, "predicted": predicted,
            "rel_err_ratio": abs(abs(measured) - predicted) / predicted,
            "rel_err_entry": abs(abs(q) - predicted) / predicted,
        })
    ff = deviation_form_factor(c, pl, ab)
    names = [c.cell_name(0, x[0]) if c.group.order == 1 else str(x) for x in (A_, B_)]
    return {"rank_before": r, "D": D_rows, "C": C_cols, "new_edge": ab, "AB": names,
            "trials": trials, "form_factor": ff}


def deviation_form_factor(c: SimplicialPreComplex, placement: CoverPlacement, e: int,
                          omit: int = 3, rotation=None) -> dict:
    """3 |det J| / |V| for the three faces ABX with X != omitted link vertex.

    ``J`` holds the d(S^2) responses of those faces to the deviation of edge
    ``e``; ``V`` is the 4-volume of the simplex AB + the three X.  The value
    is compared with 72 L_AB^(5/2).
    """
    a, b, link, star = _edge_link(c, e)
    chosen = [x for i, x in enumerate(link) if i != omit]
    R = area_sq_response(c, placement)
    faces = [star[x] for x in chosen]
    J = R[np.ix_(faces, range(3 * e, 3 * e + 3))]
    if rotation is not None:
        J = J @ rotation
    V = abs(signed_volume(placement.lifts([a, b] + chosen)))
    L = float(((placement.lift(a) - placement.lift(b)) ** 2).sum())
    value = 3 * abs(np.linalg.det(J)) / V
    target = 72 * L ** 2.5
    return {"value": value, "target": target, "rel_err": abs(value - target) / target,
            "det_J": float(np.linalg.det(J)), "volume": V, "L_AB": L}


def edge_star_faces(c: SimplicialPreComplex, e: int) -> dict:
    """Third vertex label -> 2-face cell, for the faces around edge ``e``."""
    out = {}
    for t, pos in c.slots[1][e]:
        for x in range(c.dim + 1):
            if x in pos:
                continue
            f = c.local_cell(t, pos + (x,))
            lab = c.tops[t][x]
            if out.setdefault(lab, f) != f:
                raise MoveError("WRONG_LINK", f"edge {e} meets two faces through {lab}")
    return out


def _edge_link(c, e):
    faces = edge_star_faces(c, e)
    if len(c.slots[1][e]) != 4 or len(faces) != 4:
        raise MoveError("WRONG_LINK", f"edge {e} is not surrounded by exactly four simplices")
    a, b = c.cell_labels(1, e)
    return a, b, sorted(faces), faces


def link_coefficients(placement, a, b, link) -> np.ndarray:
    """Signed volumes annihilating the d(S^2) responses of faces AB + link vertex.

    Coefficient of face ABX_i is (-1)^(i+1) times the oriented volume of
    (A, B, other three link vertices in order).
    """
    out = []
    for i in range(4):
        rest = [x for j, x in enumerate(link) if j != i]
        out.append((-1) ** (i + 1) * signed_volume(placement.lifts([a, b] + rest)))
    return np.array(out)


def four_surrounded_edges(c: SimplicialPreComplex) -> list:
    return [e for e in range(c.n_cells(1)) if len(c.slots[1][e]) == 4]


def edge_identity_residuals(c: SimplicialPreComplex, placement: CoverPlacement, e: int,
                            R=None, Q4=None) -> dict:
    """Linear-dependence, rank and column-proportion checks for a 4-surrounded edge."""
    a, b, link, star = _edge_link(c, e)
    if R is None:
        R = area_sq_response(c, placement)
    if Q4 is None:
        Q4 = assemble_Q4(c, read_metric(c, placement), placement=placement)
    faces = [star[x] for x in link]
    block = R[np.ix_(faces, range(3 * e, 3 * e + 3))]
    coef = link_coefficients(placement, a, b, link)
    annihilation = float(np.abs(coef @ block).max() / (np.abs(coef).max() * np.abs(block).max()))
    rank = numerical_rank(block)[0]
    areas = np.array([triangle_area(placement.lifts([a, b, x])) for x in link])
    pred = coef * areas
    col = Q4[faces, e]
    cfit = (col @ pred) / (pred @ pred)
    # folded regions can cancel the whole column; zero is trivially proportional
    vanishes = bool(np.abs(col).max() <= 1e-9 * np.abs(Q4).max())
    proportion = 0.0 if vanishes else float(np.abs(col - cfit * pred).max() / np.abs(col).max())
    return {"edge": e, "annihilation": annihilation, "rank": rank, "proportion": proportion,
            "column_vanishes": vanishes}


def move_experiment(c, placement, kinds, n: int, seed=0, invariant=None, max_attempts=None):
    """Apply ``n`` random admissible moves; record the invariant after each."""
    from .torsion import compute_invariant

    invariant = invariant or (lambda cc, pp: compute_invariant(cc, pp).invariant)
    rng = np.random.default_rng(seed)
    trace = [invariant(c, placement)]
    applied = []
    attempts = 0
    max_attempts = max_attempts or 50 * max(n, 1)
    while len(applied) < n and attempts < max_attempts:
        attempts += 1
        kind = kinds[int(rng.integers(len(kinds)))]
        sites = find_sites(c, kind)
        if not sites:
            continue
        site = sites[int(rng.integers(len(sites)))]
        try:
            res = apply_move(c, placement, site, rng)
        except MoveError as exc:
            log.debug("skipping %s at %s: %s", kind, site.cell, exc)
            continue
        c, placement = res.complex, res.placement
        applied.append(res.report)
        trace.append(invariant(c, placement))
    return trace, applied, c, placement
