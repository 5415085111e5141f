"""Developing maps: equivariant placements of cover vertices in flat space.

Zero-curvature metrics are produced by construction: place one lift of every
quotient vertex, complete each orbit with the representation, read the
squared lengths off the coordinates.
"""

from __future__ import annotations

import logging
import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .complex_core import DeckGroup, SimplicialPreComplex
from .metric import (GeometryError, MetricData, deficit_angles, signed_volume,
                     simplex_degenerate)

log = logging.getLogger(__name__)

MAX_RESAMPLE = 100


class DevelopError(ValueError):
    def __init__(self, code: str, message: str):
        super().__init__(f"{code}: {message}")
        self.code = code


def rot_z(angle: float, dim: int = 3) -> np.ndarray:
    R = np.eye(dim)
    c, s = math.cos(angle), math.sin(angle)
    R[0, 0], R[0, 1], R[1, 0], R[1, 1] = c, -s, s, c
    return R


def drot_z(angle: float, dim: int = 3) -> np.ndarray:
    D = np.zeros((dim, dim))
    c, s = math.cos(angle), math.sin(angle)
    D[0, 0], D[0, 1], D[1, 0], D[1, 1] = -s, -c, c, -s
    return D


@dataclass(frozen=True)
class Representation:
    """Image of the fundamental-group generator in the Euclidean group.

    kind: ``trivial``, ``single_axis_cyclic`` (rotation by 2*pi*k/p about z),
    ``multi_axis`` (only changes the gauge basis) or ``cyclic_infinite``
    (screw motion: rotation ``alpha`` plus translation ``a`` along z).
    """

    kind: str = "trivial"
    dim: int = 3
    p: int = 1
    k: int = 0
    alpha: float = 0.0
    a: float = 0.0

    @property
    def group(self) -> DeckGroup:
        if self.kind == "cyclic_infinite":
            return DeckGroup(None)
        if self.kind == "single_axis_cyclic":
            return DeckGroup(self.p)
        return DeckGroup(1)

    def angle(self) -> float:
        if self.kind == "single_axis_cyclic":
            return 2 * math.pi * self.k / self.p
        if self.kind == "cyclic_infinite":
            return self.alpha
        return 0.0

    def isometry(self, j: int):
        """``(R, t)`` with lift ``j`` of a vertex equal to ``R @ x0 + t``."""
        if self.kind in ("trivial", "multi_axis"):
            return np.eye(self.dim), np.zeros(self.dim)
        t = np.zeros(self.dim)
        if self.kind == "cyclic_infinite":
            t[2] = j * self.a
        return rot_z(j * self.angle(), self.dim), t


@dataclass
class CoverPlacement:
    """Coordinates of copy 0 of every quotient vertex plus the representation."""

    rep: Representation
    base: np.ndarray  # (m, d)
    gauge_record: dict = field(default_factory=dict)

    def lift(self, label) -> np.ndarray:
        v, j = label
        R, t = self.rep.isometry(j)
        return R @ self.base[v] + t

    def lifts(self, labels) -> np.ndarray:
        return np.array([self.lift(l) for l in labels])

    def top_coords(self, c: SimplicialPreComplex, t: int) -> np.ndarray:
        return self.lifts(c.tops[t])

    def equivariance_residual(self, copies: int = 3) -> float:
        """Max |lift(j+1) - f(lift(j))| over vertices and a few copies."""
        R, t = self.rep.isometry(1)
        res = 0.0
        for v in range(len(self.base)):
            for j in range(copies):
                res = max(res, float(np.abs(self.lift((v, j + 1)) - (R @ self.lift((v, j)) + t)).max()))
        return res


def image_signs(c: SimplicialPreComplex, placement: CoverPlacement) -> np.ndarray:
    """Metric signs: combinatorial orientation times image orientation."""
    return np.array([c.orient[t] * np.sign(signed_volume(placement.top_coords(c, t)))
                     for t in range(c.n_tops)], dtype=float)


def read_metric(c: SimplicialPreComplex, placement: CoverPlacement, check: bool = True) -> MetricData:
    L = np.empty(c.n_cells(1))
    for e in range(c.n_cells(1)):
        a, b = placement.lifts(c.cell_labels(1, e))
        L[e] = float(((a - b) ** 2).sum())
    if check:
        for e, slots in enumerate(c.slots[1]):
            for t, pos in slots:
                a, b = placement.lifts([c.tops[t][p] for p in pos])
                if abs(((a - b) ** 2).sum() - L[e]) > 1e-10 * max(L[e], 1.0):
                    raise DevelopError("NOT_EQUIVARIANT", f"edge {e} length depends on the lift")
    return MetricData(L, image_signs(c, placement))


def placement_degenerate(c: SimplicialPreComplex, placement: CoverPlacement) -> bool:
    if placement.rep.kind == "single_axis_cyclic":
        if np.hypot(placement.base[:, 0], placement.base[:, 1]).min() < 1e-9:
            return True
    return any(simplex_degenerate(placement.top_coords(c, t)) for t in range(c.n_tops))


def uniform_box_sampler(m: int, d: int, rng) -> np.ndarray:
    return rng.uniform(1.0, 2.0, size=(m, d))


def equivariant_placement(c: SimplicialPreComplex, rep: Representation, rng, sampler=None,
                          tol: float = 1e-10):
    """Place one fundamental domain generically and complete orbits by ``rep``.

    ``rng`` is a numpy Generator (or an int seed).  ``sampler(m, d, rng)``
    overrides the default uniform box in [1, 2]^d.
    """
    rng = np.random.default_rng(rng)
    sampler = sampler or uniform_box_sampler
    m = len(c.vertex_names)
    for attempt in range(MAX_RESAMPLE):
        base = np.asarray(sampler(m, c.dim, rng), dtype=float)
        placement = CoverPlacement(rep, base)
        if placement_degenerate(c, placement):
            log.debug("placement attempt %d degenerate; resampling", attempt)
            continue
        metric = read_metric(c, placement)
        omega = deficit_angles(c, metric)
        if np.abs(omega).max() > tol:
            raise DevelopError("CURVED_INPUT", f"placement has curvature {np.abs(omega).max():.3e}")
        placement.gauge_record = {"attempts": attempt + 1}
        return placement, metric
    raise DevelopError("RESAMPLE_EXHAUSTED", f"no non-degenerate placement in {MAX_RESAMPLE} tries")


# ---------------------------------------------------------------- develop

def _embed_simplex(Lm: np.ndarray, sign: float) -> np.ndarray:
    """Coordinates realizing squared lengths ``Lm`` with orientation ``sign``."""
    n = Lm.shape[0]
    G = 0.5 * (Lm[0, 1:][:, None] + Lm[0, 1:][None, :] - Lm[1:, 1:])
    w, V = np.linalg.eigh(G)
    E = V * np.sqrt(np.maximum(w, 0.0))
    X = np.vstack([np.zeros(n - 1), E])
    if np.sign(signed_volume(X)) != sign:
        X[:, -1] = -X[:, -1]
    return X


def _apex(face: np.ndarray, sq: np.ndarray, sign: float, order: int) -> np.ndarray:
    """Point at squared distances ``sq`` from the ``face`` points, orientation-chosen.

    ``order`` places the apex among the face points to form the ordered top
    whose signed volume must have sign ``sign``.
    """
    f0 = face[0]
    E = face[1:] - f0
    rhs = 0.5 * (sq[0] + (E ** 2).sum(1) - sq[1:])
    y, *_ = np.linalg.lstsq(E, rhs, rcond=None)
    _, _, Vt = np.linalg.svd(E)
    normal = Vt[-1]
    h = math.sqrt(max(sq[0] - y @ y, 0.0))
    for cand in (f0 + y + h * normal, f0 + y - h * normal):
        pts = list(face)
        pts.insert(order, cand)
        if np.sign(signed_volume(np.array(pts))) == sign:
            return cand
    return f0 + y + h * normal


@dataclass
class DevelopedCover:
    coords: dict  # lifted label -> point
    visited: list  # cover tops (t, shift)
    max_reentry: float


def develop(c: SimplicialPreComplex, m: MetricData, base: int = 0, copies: int = 2,
            curv_tol: float = 1e-8, mono_tol: float = 1e-8) -> DevelopedCover:
    """Propagate coordinates over the cover breadth-first from top ``base``.

    For an infinite deck group the cover is truncated to shifts in
    ``[-copies, copies]``.
    """
    omega = deficit_angles(c, m)
    if np.abs(omega).max() > curv_tol:
        raise DevelopError("CURVED_INPUT", f"max deficit angle {np.abs(omega).max():.3e}")
    d = c.dim
    group = c.group
    scale = math.sqrt(m.L.mean())
    coords = {}
    X = _embed_simplex(m.local_sq(c, base), m.eps[base] * c.orient[base])
    for p in range(d + 1):
        coords[c.tops[base][p]] = X[p]
    start = (base, 0)
    seen = {start}
    queue = deque([start])
    visited = []
    worst = 0.0

    def label(t, s, p):
        return group.shift(c.tops[t][p], s)

    while queue:
        t, s = queue.popleft()
        visited.append((t, s))
        for i in range(d + 1):
            g = c.gluing[(t, i)]
            # label(t2, perm[i]) = label(t, i) + shift, so the neighbor copy is s - shift
            s2 = group.reduce(s - g.shift) if group.order is not None else s - g.shift
            if group.order is None and abs(s2) > copies:
                continue
            t2 = g.top2
            if (t2, s2) in seen:
                continue
            Lm = m.local_sq(c, t2)
            face_pos = [p for p in range(d + 1) if p != g.pos2]
            face = np.array([coords[label(t2, s2, p)] for p in face_pos])
            sign = m.eps[t2] * c.orient[t2]
            x = _apex(face, Lm[g.pos2, face_pos], sign, g.pos2)
            lab = label(t2, s2, g.pos2)
            if lab in coords:
                err = float(np.linalg.norm(coords[lab] - x))
                worst = max(worst, err)
                if err > mono_tol * scale:
                    raise DevelopError("MONODROMY", f"re-entry mismatch {err:.3e} at vertex {lab}")
            else:
                coords[lab] = x
            seen.add((t2, s2))
            queue.append((t2, s2))
    return DevelopedCover(coords, visited, worst)


def fit_isometry(P: np.ndarray, Q: np.ndarray, proper: bool = True):
    """Least-squares rigid motion ``(R, t)`` with ``R @ P_i + t ~ Q_i`` (Kabsch)."""
    P, Q = np.asarray(P, float), np.asarray(Q, float)
    pc, qc = P.mean(0), Q.mean(0)
    H = (P - pc).T @ (Q - qc)
    U, _, Vt = np.linalg.svd(H)
    D = np.eye(P.shape[1])
    if proper and np.linalg.det(Vt.T @ U.T) < 0:
        D[-1, -1] = -1
    R = Vt.T @ D @ U.T
    return R, qc - R @ pc


def roundtrip_deviation(c: SimplicialPreComplex, placement: CoverPlacement, dev: DevelopedCover) -> float:
    """Max vertex deviation after fitting a global isometry, relative to diameter."""
    labels = sorted(dev.coords)
    P = np.array([dev.coords[l] for l in labels])
    Q = placement.lifts(labels)
    R, t = fit_isometry(P, Q)
    diam = math.sqrt(((Q[:, None] - Q[None]) ** 2).sum(-1).max())
    return float(np.linalg.norm(P @ R.T + t - Q, axis=1).max() / diam)


def deck_rotation_angle(c: SimplicialPreComplex, dev: DevelopedCover) -> float:
    """Rotation angle of the isometry carrying copy j to copy j+1 on the developed cover."""
    pairs = [(l, c.group.shift(l, 1)) for l in dev.coords if c.group.shift(l, 1) in dev.coords]
    P = np.array([dev.coords[a] for a, _ in pairs])
    Q = np.array([dev.coords[b] for _, b in pairs])
    R, _ = fit_isometry(P, Q)
    return float(np.arccos(np.clip((np.trace(R) - 1) / 2, -1, 1)))


# ---------------------------------------------------------------- gauge

@dataclass
class GaugeBasis:
    """Coordinate differentials spanning (dx) and (dg).

    ``columns[j]`` is either ``("vertex", v, dX)``, meaning the base point of
    vertex ``v`` moves with velocity ``dX``, or ``("alpha",)`` / ``("shift",)``
    for the screw-motion parameters.
    """

    labels: list
    columns: list

    def __len__(self):
        return len(self.columns)


def gauge_basis(placement: CoverPlacement, kind: str | None = None) -> GaugeBasis:
    rep = placement.rep
    kind = kind or rep.kind
    X = placement.base
    m, d = X.shape
    labels, cols = [], []
    if kind in ("single_axis_cyclic", "cyclic_infinite"):
        rho = np.hypot(X[:, 0], X[:, 1])
        if rho.min() < 1e-9:
            raise DevelopError("GAUGE_DEGENERATE", "a gauge vertex lies on the rotation axis")
        radial = np.column_stack([X[:, 0] / rho, X[:, 1] / rho, np.zeros(m)])
        tangential = np.column_stack([-X[:, 1] / rho, X[:, 0] / rho, np.zeros(m)])
        for v in range(m):
            labels.append(f"rho{v} drho{v}")
            cols.append(("vertex", v, radial[v] / rho[v]))
        for v in range(1, m):
            labels.append(f"d(phi{v}-phi0)")
            cols.append(("vertex", v, rho[v] * tangential[v]))
        for v in range(1, m):
            labels.append(f"d(z{v}-z0)")
            cols.append(("vertex", v, np.array([0.0, 0.0, 1.0])))
        if kind == "cyclic_infinite":
            labels += ["dalpha", "da"]
            cols += [("alpha",), ("shift",)]
    elif kind == "multi_axis":
        for v in range(m):
            for a in range(d):
                labels.append(f"dx{v}_{a}")
                cols.append(("vertex", v, np.eye(d)[a]))
    elif kind == "trivial":
        if m < d:
            raise DevelopError("GAUGE_DEGENERATE", "too few vertices for the pin gauge")
        frame = []
        for v in range(1, d):
            w = X[v] - X[0]
            for f in frame:
                w = w - (w @ f) * f
            n = np.linalg.norm(w)
            if n < 1e-9 * np.linalg.norm(X[v] - X[0]):
                raise DevelopError("GAUGE_DEGENERATE", "gauge vertices are affinely dependent")
            frame.append(w / n)
        _, _, Vt = np.linalg.svd(np.array(frame))
        full = frame + [Vt[-1]]
        for v in range(1, m):
            for a in range(min(v, d)):
                labels.append(f"dx{v}.e{a + 1}")
                cols.append(("vertex", v, full[a]))
    else:
        raise ValueError(f"unknown gauge kind {kind}")
    return GaugeBasis(labels, cols)


def gauge_basis_size(m: int, kind: str, d: int = 3) -> int:
    return {"single_axis_cyclic": 3 * m - 2, "cyclic_infinite": 3 * m,
            "multi_axis": d * m, "trivial": d * m - d * (d + 1) // 2}[kind]


def perturb_placement(placement: CoverPlacement, basis: GaugeBasis, j: int, h: float) -> CoverPlacement:
    """Move along gauge column ``j`` by parameter step ``h`` (finite-difference path).

    Vertex columns follow the exact parameter curves (rho^2/2, phi, z) rather
    than the tangent vector, so central differences converge to the column.
    """
    col = basis.columns[j]
    rep = placement.rep
    X = placement.base.copy()
    if col[0] == "vertex":
        v = col[1]
        label = basis.labels[j]
        if label.startswith("rho"):
            rho = math.hypot(X[v, 0], X[v, 1])
            new = math.sqrt(max(rho ** 2 + 2 * h, 0.0))
            X[v, :2] *= new / rho
        elif label.startswith("d(phi"):
            X[v] = rot_z(h, X.shape[1]) @ X[v]
        else:
            X[v] = X[v] + h * col[2]
        return CoverPlacement(rep, X)
    if col[0] == "alpha":
        rep = Representation(rep.kind, rep.dim, rep.p, rep.k, rep.alpha + h, rep.a)
    else:
        rep = Representation(rep.kind, rep.dim, rep.p, rep.k, rep.alpha, rep.a + h)
    return CoverPlacement(rep, X)
