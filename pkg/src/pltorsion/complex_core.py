"""Oriented simplicial pre-complexes of closed 3- and 4-manifolds.

A top simplex is an ordered tuple of *lifted* vertex labels ``(v, j)``: ``v``
indexes a vertex of the quotient complex and ``j`` names one of its copies in
a cover on which the deck group acts by ``j -> j + 1``.  With the trivial
group every copy index is 0 and the labels are ordinary vertices.

Cells are identified by gluing slots, not by vertex sets: two local faces
``(t, positions)`` belong to the same cell when a chain of (d-1)-face
pairings carries one onto the other.  This lets a simplex appear several
times in the boundary of another one.
"""

from __future__ import annotations

import itertools
from collections import defaultdict, deque
from dataclasses import dataclass, field

import numpy as np


class ComplexError(ValueError):
    """Combinatorial failure; ``code`` is one of the documented error names."""

    def __init__(self, code: str, message: str):
        super().__init__(f"{code}: {message}")
        self.code = code


Label = tuple  # (vertex index, copy index)


def perm_parity(seq) -> int:
    """Sign of the permutation that sorts ``seq`` (entries must be distinct)."""
    seq = list(seq)
    sign = 1
    seen = [False] * len(seq)
    order = sorted(range(len(seq)), key=lambda i: seq[i])
    for i in range(len(seq)):
        if seen[i]:
            continue
        j, length = i, 0
        while not seen[j]:
            seen[j] = True
            j = order[j]
            length += 1
        if length % 2 == 0:
            sign = -sign
    return sign


@dataclass(frozen=True)
class DeckGroup:
    """Cyclic deck group acting on copy indices; ``order=None`` means infinite."""

    order: int | None = 1

    def reduce(self, j: int) -> int:
        return j if self.order is None else j % self.order

    def shift(self, label: Label, s: int) -> Label:
        return (label[0], self.reduce(label[1] + s))

    def shifts(self):
        if self.order is None:
            raise ValueError("infinite group has no finite shift list")
        return range(self.order)

    def key(self, labels) -> tuple:
        """Canonical form of a set of lifted labels modulo the deck action."""
        labels = list(labels)
        if self.order is None:
            s = -min(j for _, j in labels)
            return tuple(sorted((v, j + s) for v, j in labels))
        return min(tuple(sorted(self.shift(l, s) for l in labels)) for s in self.shifts())


@dataclass
class Gluing:
    """Face opposite ``pos`` of one top glued to face opposite ``pos2`` of ``top2``.

    ``perm[i]`` is the position in ``top2`` matching position ``i``; labels
    satisfy ``label(top2, perm[i]) == label(top, i) + shift``.
    """

    top2: int
    pos2: int
    perm: tuple
    shift: int


@dataclass
class SimplicialPreComplex:
    dim: int
    vertex_names: list
    tops: list  # list of tuples of labels
    orient: np.ndarray  # combinatorial orientation sign per top
    group: DeckGroup
    gluing: dict  # (t, i) -> Gluing
    # derived tables
    cells: list = field(default_factory=list)  # cells[k][c] = representative (t, positions)
    cell_of: list = field(default_factory=list)  # cell_of[k][(t, positions)] = (c, shift, parity)
    slots: list = field(default_factory=list)  # slots[k][c] = list of (t, positions)

    # ---- basic queries -------------------------------------------------
    @property
    def n_tops(self) -> int:
        return len(self.tops)

    def n_cells(self, k: int) -> int:
        return len(self.cells[k])

    def counts(self) -> tuple:
        return tuple(self.n_cells(k) for k in range(self.dim + 1))

    def euler_characteristic(self) -> int:
        return sum((-1) ** k * n for k, n in enumerate(self.counts()))

    def label(self, t: int, pos: int) -> Label:
        return self.tops[t][pos]

    def cell_labels(self, k: int, c: int) -> tuple:
        """Lifted labels of the representative slot of cell ``c``, in position order."""
        t, positions = self.cells[k][c]
        return tuple(self.tops[t][p] for p in positions)

    def cell_name(self, k: int, c: int) -> str:
        return "".join(self._token(l) for l in self.cell_labels(k, c)) if k == 0 else \
            "-".join(self._token(l) for l in self.cell_labels(k, c))

    def _token(self, label: Label) -> str:
        name = self.vertex_names[label[0]]
        return name if self.group.order == 1 else f"{name}@{label[1]}"

    def local_cell(self, t: int, positions) -> int:
        positions = tuple(sorted(positions))
        return self.cell_of[len(positions) - 1][(t, positions)][0]

    def find_cells(self, labels) -> list:
        """All cells whose lifted labels match ``labels`` modulo the deck action."""
        k = len(labels) - 1
        key = self.group.key(labels)
        return [c for c in range(self.n_cells(k)) if self.group.key(self.cell_labels(k, c)) == key]

    def top_edges(self, t: int) -> dict:
        """Local vertex pair -> edge cell for top ``t``."""
        return {pair: self.cell_of[1][(t, pair)][0]
                for pair in itertools.combinations(range(self.dim + 1), 2)}

    def cofaces_top(self, k: int, c: int) -> list:
        return [t for t, _ in self.slots[k][c]]

    def hinge_cycle(self, h: int) -> list:
        """Cyclically ordered ``(top, hinge positions, orientation)`` around hinge ``h``."""
        d = self.dim
        start = self.slots[d - 2][h][0]
        cycle = []
        t, hpos = start
        # leave through the face that omits the smaller complementary position
        comp = [p for p in range(d + 1) if p not in hpos]
        exit_pos = comp[0]
        limit = len(self.slots[d - 2][h]) + 1
        while True:
            cycle.append((t, hpos, int(self.orient[t])))
            g = self.gluing[(t, exit_pos)]
            t2 = g.top2
            hpos2 = tuple(sorted(g.perm[p] for p in hpos))
            comp2 = [p for p in range(d + 1) if p not in hpos2]
            # entered through the face omitting g.pos2; leave through the other one
            exit2 = comp2[0] if comp2[1] == g.pos2 else comp2[1]
            t, hpos, exit_pos = t2, hpos2, exit2
            if (t, hpos) == start:
                break
            if len(cycle) >= limit:
                raise ComplexError("OPEN_LINK", f"hinge {h} cycle does not close")
        return cycle

    def copy(self) -> "SimplicialPreComplex":
        return build_complex(self.dim, list(zip(self.orient, self.tops)), self.vertex_names,
                             self.group, gluing=dict(self.gluing))


def _face_perm(group: DeckGroup, top1, i1: int, top2, i2: int, shift: int):
    """Position bijection for gluing face ``i1`` of ``top1`` to face ``i2`` of ``top2``."""
    target = {l: p for p, l in enumerate(top2) if p != i2}
    perm = [None] * len(top1)
    perm[i1] = i2
    for p, l in enumerate(top1):
        if p == i1:
            continue
        q = target.get(group.shift(l, shift))
        if q is None:
            return None
        perm[p] = q
    return tuple(perm)


def auto_gluing(tops, group: DeckGroup) -> dict:
    """Pair (d-1)-faces whose label sets agree modulo the deck action.

    Raises NON_MANIFOLD if some face key does not occur exactly twice.
    """
    by_key = defaultdict(list)
    for t, top in enumerate(tops):
        for i in range(len(top)):
            face = [l for p, l in enumerate(top) if p != i]
            by_key[group.key(face)].append((t, i))
    gluing = {}
    for key, occ in by_key.items():
        if len(occ) != 2:
            raise ComplexError("NON_MANIFOLD", f"face {key} lies in {len(occ)} top-simplex slots")
        (t1, i1), (t2, i2) = occ
        g = find_face_gluing(group, tops, t1, i1, t2, i2)
        if g is None:
            raise ComplexError("NON_MANIFOLD", f"cannot match face {key}")
        gluing[(t1, i1)] = g
        gluing[(t2, i2)] = _invert(g, t1, i1)
    return gluing


def find_face_gluing(group: DeckGroup, tops, t1, i1, t2, i2, shift=None):
    top1, top2 = tops[t1], tops[t2]
    if shift is not None:
        candidates = [shift]
    elif group.order is None:
        f1 = [l for p, l in enumerate(top1) if p != i1]
        f2 = [l for p, l in enumerate(top2) if p != i2]
        candidates = sorted({b[1] - a[1] for a in f1 for b in f2 if a[0] == b[0]})
    else:
        candidates = list(group.shifts())
    found = []
    for s in candidates:
        perm = _face_perm(group, top1, i1, top2, i2, s)
        if perm is not None:
            found.append(Gluing(t2, i2, perm, s))
    if len(found) > 1 and shift is None:
        raise ComplexError("NON_MANIFOLD", f"ambiguous face match between tops {t1} and {t2}")
    return found[0] if found else None


def _invert(g: Gluing, t1: int, i1: int) -> Gluing:
    inv = [None] * len(g.perm)
    for p, q in enumerate(g.perm):
        inv[q] = p
    return Gluing(t1, i1, tuple(inv), -g.shift)


def build_complex(dim: int, tops, vertex_names=None, group: DeckGroup | None = None,
                  gluing: dict | None = None) -> SimplicialPreComplex:
    """Build and validate a pre-complex.

    ``tops`` is a list of ``(sign, labels)`` with labels either vertex indices
    or ``(vertex, copy)`` pairs.  ``gluing`` optionally fixes the face
    pairings; by default faces are paired by their label sets.
    """
    if dim not in (3, 4):
        raise ComplexError("BAD_ARITY", f"dimension must be 3 or 4, got {dim}")
    if not tops:
        raise ComplexError("BAD_ARITY", "empty top-simplex list")
    group = group or DeckGroup(1)
    norm_tops, signs = [], []
    for sign, labels in tops:
        if len(labels) != dim + 1:
            raise ComplexError("BAD_ARITY", f"simplex {labels} has {len(labels)} vertices")
        lab = tuple((l, 0) if isinstance(l, (int, np.integer)) else (int(l[0]), group.reduce(int(l[1])))
                    for l in labels)
        if len(set(lab)) != len(lab):
            raise ComplexError("BAD_ARITY", f"simplex {labels} repeats a lifted vertex")
        norm_tops.append(lab)
        signs.append(1 if sign > 0 else -1)
    n_vert = 1 + max(l[0] for top in norm_tops for l in top)
    if vertex_names is None:
        vertex_names = [str(i + 1) for i in range(n_vert)]
    vertex_names = list(vertex_names)
    if gluing is None:
        gluing = auto_gluing(norm_tops, group)
    c = SimplicialPreComplex(dim, vertex_names, norm_tops, np.array(signs, dtype=int), group, gluing)
    _check_gluing(c)
    _derive_cells(c)
    _validate(c)
    return c


def _check_gluing(c: SimplicialPreComplex):
    d = c.dim
    for t in range(c.n_tops):
        for i in range(d + 1):
            g = c.gluing.get((t, i))
            if g is None:
                raise ComplexError("NON_MANIFOLD", f"face {i} of top {t} is unglued")
            back = c.gluing.get((g.top2, g.pos2))
            if back is None or back.top2 != t or back.pos2 != i:
                raise ComplexError("NON_MANIFOLD", f"face {i} of top {t} glued inconsistently")
            if (g.top2, g.pos2) == (t, i):
                raise ComplexError("NON_MANIFOLD", f"face {i} of top {t} glued to itself")
            for p in range(d + 1):
                if p != i and c.group.shift(c.tops[t][p], g.shift) != c.tops[g.top2][g.perm[p]]:
                    raise ComplexError("NON_MANIFOLD", f"gluing of face {i} of top {t} mismatches labels")
            # induced orientations must be opposite
            s1 = c.orient[t] * (-1) ** i
            s2 = c.orient[g.top2] * (-1) ** g.pos2
            face_perm = [g.perm[p] for p in range(d + 1) if p != i]
            if s1 * perm_parity(face_perm) == s2:
                raise ComplexError("ORIENTATION_CLASH",
                                   f"tops {t} and {g.top2} induce equal orientations on a shared face")


def _derive_cells(c: SimplicialPreComplex):
    """Union local k-slots along face gluings; record shift and ordering per slot."""
    d = c.dim
    c.cells, c.cell_of, c.slots = [], [], []
    for k in range(d + 1):
        cells, cell_of, slots = [], {}, []
        local = [(t, P) for t in range(c.n_tops) for P in itertools.combinations(range(d + 1), k + 1)]
        for node in local:
            if node in cell_of:
                continue
            cid = len(cells)
            cells.append(node)
            members = []
            # order[i] = position in this slot matching position node[1][i] of the representative
            queue = deque([(node, tuple(node[1]), 0)])
            seen = {node: (tuple(node[1]), 0)}
            while queue:
                (t, P), order, shift = queue.popleft()
                members.append((t, P))
                for i in range(d + 1):
                    if i in P:
                        continue
                    g = c.gluing[(t, i)]
                    order2 = tuple(g.perm[p] for p in order)
                    nxt = (g.top2, tuple(sorted(order2)))
                    sh2 = c.group.reduce(shift + g.shift) if c.group.order is not None else shift + g.shift
                    if nxt in seen:
                        if seen[nxt] != (order2, sh2):
                            raise ComplexError("NON_MANIFOLD",
                                               f"{k}-cell through top {t} is glued to itself with a twist")
                        continue
                    seen[nxt] = (order2, sh2)
                    queue.append((nxt, order2, sh2))
            for m in members:
                order, shift = seen[m]
                cell_of[m] = (cid, shift, perm_parity(order))
            slots.append(members)
        c.cells.append(cells)
        c.cell_of.append(cell_of)
        c.slots.append(slots)
    # vertex cells in vertex-index order
    by_vertex = {}
    for cid, (t, P) in enumerate(c.cells[0]):
        v = c.tops[t][P[0]][0]
        if v in by_vertex:
            raise ComplexError("NON_MANIFOLD", f"vertex {c.vertex_names[v]} splits into several cells")
        by_vertex[v] = cid
    used = sorted(by_vertex)
    if used != list(range(len(c.vertex_names))):
        raise ComplexError("BAD_ARITY", "vertex list contains unused names")
    perm = [by_vertex[v] for v in used]
    inv = {old: new for new, old in enumerate(perm)}
    c.cells[0] = [c.cells[0][o] for o in perm]
    c.slots[0] = [c.slots[0][o] for o in perm]
    c.cell_of[0] = {key: (inv[val[0]], val[1], val[2]) for key, val in c.cell_of[0].items()}


def _validate(c: SimplicialPreComplex):
    d = c.dim
    for f, sl in enumerate(c.slots[d - 1]):
        if len(sl) != 2:
            raise ComplexError("NON_MANIFOLD", f"(d-1)-cell {f} lies in {len(sl)} slots")
    for h in range(c.n_cells(d - 2)):
        cyc = c.hinge_cycle(h)
        if len(cyc) != len(c.slots[d - 2][h]):
            raise ComplexError("NON_MANIFOLD", f"link of hinge {h} is not a single cycle")


def boundary_of_simplex(names) -> list:
    """Signed tops of the boundary of the simplex on ``names`` (alternating signs)."""
    n = len(names)
    return [((-1) ** i, tuple(j for j in range(n) if j != i)) for i in range(n)]


def orient_consistently(dim: int, tops, group: DeckGroup, gluing=None) -> list:
    """Choose top signs so every shared face gets opposite induced orientations."""
    tops = [tuple(t) for t in tops]
    if gluing is None:
        gluing = auto_gluing(tops, group)
    signs = [0] * len(tops)
    for start in range(len(tops)):
        if signs[start]:
            continue
        signs[start] = 1
        queue = deque([start])
        while queue:
            t = queue.popleft()
            for i in range(dim + 1):
                g = gluing[(t, i)]
                face_perm = [g.perm[p] for p in range(dim + 1) if p != i]
                want = -signs[t] * (-1) ** i * perm_parity(face_perm) * (-1) ** g.pos2
                if signs[g.top2] == 0:
                    signs[g.top2] = want
                    queue.append(g.top2)
                elif signs[g.top2] != want:
                    raise ComplexError("ORIENTATION_CLASH", "complex is not orientable")
    return signs
