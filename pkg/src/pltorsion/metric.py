"""Euclidean metric quantities on simplices: volumes, dihedral angles, deficits."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

DEGENERACY = 1e-24


class GeometryError(ValueError):
    def __init__(self, code: str, message: str):
        super().__init__(f"{code}: {message}")
        self.code = code


@dataclass
class MetricData:
    """Squared length per edge cell and metric sign per top simplex."""

    L: np.ndarray
    eps: np.ndarray

    def local_sq(self, c, t: int) -> np.ndarray:
        n = c.dim + 1
        G = np.zeros((n, n))
        for (i, j), e in c.top_edges(t).items():
            G[i, j] = G[j, i] = self.L[e]
        return G


def cayley_menger_sq_volume(G) -> float:
    """Squared k-volume from a (k+1)x(k+1) matrix of squared distances."""
    G = np.asarray(G, dtype=float)
    k = G.shape[0] - 1
    cm = np.ones((k + 2, k + 2))
    cm[0, 0] = 0.0
    cm[1:, 1:] = G
    return (-1) ** (k + 1) * np.linalg.det(cm) / (2 ** k * math.factorial(k) ** 2)


def cm_volume(k: int, G) -> float:
    """Euclidean k-volume of the simplex with squared pairwise distances ``G``."""
    G = np.asarray(G, dtype=float)
    if G.shape != (k + 1, k + 1):
        raise ValueError(f"expected {(k + 1, k + 1)} matrix, got {G.shape}")
    if not np.allclose(G, G.T) or np.any(np.diag(G) != 0):
        raise ValueError("squared-distance matrix must be symmetric with zero diagonal")
    v2 = cayley_menger_sq_volume(G)
    scale = (G[np.triu_indices(k + 1, 1)].mean()) ** k if k > 0 else 1.0
    if v2 < -1e-12 * scale:
        raise GeometryError("NOT_REALIZABLE", f"Cayley-Menger squared volume {v2:.3e} is negative")
    if v2 < DEGENERACY * scale:
        return 0.0
    return math.sqrt(v2)


def signed_volume(coords) -> float:
    """Oriented volume of the simplex with ``d+1`` points in d-space."""
    X = np.asarray(coords, dtype=float)
    d = X.shape[1]
    return float(np.linalg.det(X[1:] - X[0])) / math.factorial(d)


def is_degenerate_sq(G) -> bool:
    G = np.asarray(G, dtype=float)
    k = G.shape[0] - 1
    mean = G[np.triu_indices(k + 1, 1)].mean()
    return cayley_menger_sq_volume(G) < DEGENERACY * mean ** k


def simplex_degenerate(coords) -> bool:
    """True if the simplex or any of its faces of dimension >= 1 is degenerate."""
    X = np.asarray(coords, dtype=float)
    n = len(X)
    D = ((X[:, None, :] - X[None, :, :]) ** 2).sum(-1)
    for size in range(2, n + 1):
        for sub in itertools.combinations(range(n), size):
            if is_degenerate_sq(D[np.ix_(sub, sub)]):
                return True
    return False


def sq_distances(coords) -> np.ndarray:
    X = np.asarray(coords, dtype=float)
    return ((X[:, None, :] - X[None, :, :]) ** 2).sum(-1)


def dihedral_angle(coords, hinge) -> float:
    """Interior angle of a top simplex at its (d-2)-face ``hinge`` (positions)."""
    X = np.asarray(coords, dtype=float)
    n = len(X)
    hinge = list(hinge)
    p, q = [i for i in range(n) if i not in hinge]
    base = X[hinge[0]]
    H = X[hinge[1:]] - base
    if len(H):
        if is_degenerate_sq(sq_distances(X[hinge])):
            raise GeometryError("DEGENERATE", "hinge has zero volume")
        Qm, _ = np.linalg.qr(H.T)
        proj = lambda v: v - Qm @ (Qm.T @ v)
    else:
        proj = lambda v: v
    a, b = proj(X[p] - base), proj(X[q] - base)
    cos = a @ b / (np.linalg.norm(a) * np.linalg.norm(b))
    return float(np.arccos(np.clip(cos, -1.0, 1.0)))


def _gradient_gram(Lm):
    """Return ``M`` (barycentric-gradient Gram matrix) and helper ``K`` for a simplex."""
    n = Lm.shape[0]
    d = n - 1
    G = 0.5 * (Lm[0, 1:][:, None] + Lm[0, 1:][None, :] - Lm[1:, 1:])
    Ginv = np.linalg.inv(G)
    P = np.vstack([-np.ones((1, d)), np.eye(d)])
    K = P @ Ginv
    return K @ P.T, K


def dihedral_angles_sq(Lm) -> np.ndarray:
    """Matrix ``theta[p, q]``: dihedral angle at the hinge opposite vertices p, q.

    Computed from squared edge lengths only, via the Gram matrix of the
    barycentric-coordinate gradients.
    """
    Lm = np.asarray(Lm, dtype=float)
    M, _ = _gradient_gram(Lm)
    s = np.sqrt(np.outer(np.diag(M), np.diag(M)))
    theta = np.arccos(np.clip(-M / s, -1.0, 1.0))
    np.fill_diagonal(theta, 0.0)
    return theta


def local_edges(n: int):
    return list(itertools.combinations(range(n), 2))


def dihedral_gradient_sq(Lm):
    """Angles and their derivatives with respect to squared lengths.

    Returns ``(theta, dtheta)`` where ``dtheta[p, q, e]`` is the derivative of
    ``theta[p, q]`` along local edge ``e`` (ordering of :func:`local_edges`).
    """
    Lm = np.asarray(Lm, dtype=float)
    n = Lm.shape[0]
    d = n - 1
    M, K = _gradient_gram(Lm)
    edges = local_edges(n)
    dM = np.empty((len(edges), n, n))
    for e, (i, j) in enumerate(edges):
        dG = np.zeros((d, d))
        if i == 0:
            a = j - 1
            dG[a, :] += 0.5
            dG[:, a] += 0.5
        else:
            dG[i - 1, j - 1] = dG[j - 1, i - 1] = -0.5
        dM[e] = -K @ dG @ K.T
    diag = np.diag(M)
    s = np.sqrt(np.outer(diag, diag))
    cos = -M / s
    theta = np.arccos(np.clip(cos, -1.0, 1.0))
    sin = np.sqrt(np.maximum(1.0 - cos ** 2, 0.0))
    ddiag = np.einsum("eii->ei", dM)
    rel = ddiag / diag
    dcos = -dM / s + (M / s)[None] * 0.5 * (rel[:, :, None] + rel[:, None, :])
    with np.errstate(divide="ignore", invalid="ignore"):
        dtheta = -dcos / sin[None]
    idx = np.arange(n)
    dtheta[:, idx, idx] = 0.0
    np.fill_diagonal(theta, 0.0)
    return theta, np.moveaxis(dtheta, 0, -1)


def _vector_angle(u, v) -> float:
    """Angle between two vectors without cancellation near 0 or pi."""
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    a, b = u * nv, v * nu
    return 2.0 * math.atan2(np.linalg.norm(a - b), np.linalg.norm(a + b))


def _unit_toward(u, w):
    """Unit vector orthogonal to unit ``u`` in the plane of ``u, w``, on the side of ``w``."""
    r = w - (u @ w) * u
    r = r - (u @ r) * u
    return r / np.linalg.norm(r)


def dihedral_gradient_coords(X):
    """Same output as :func:`dihedral_gradient_sq`, evaluated from vertex coordinates.

    The barycentric gradients ``n_a`` come straight from the edge vectors.
    A change of ``L_ij`` moves them (up to rotation) by
    ``dn_a = (M_ai n_j + M_aj n_i) / 4``, and the angle between ``n_p`` and
    ``n_q`` is differentiated through the in-plane unit normals, which avoids
    dividing by the sine of the angle.
    """
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    E = X[1:] - X[0]
    N = np.empty((n, n - 1))
    N[1:] = np.linalg.inv(E).T
    N[0] = -N[1:].sum(0)
    M = N @ N.T
    norms = np.linalg.norm(N, axis=1)
    U = N / norms[:, None]
    edges = local_edges(n)
    ei = np.array([i for i, _ in edges])
    ej = np.array([j for _, j in edges])
    theta = np.zeros((n, n))
    dtheta = np.zeros((n, n, len(edges)))
    for p in range(n):
        for q in range(p + 1, n):
            theta[p, q] = theta[q, p] = math.pi - _vector_angle(N[p], N[q])
            val = np.zeros(len(edges))
            for a, b in ((p, q), (q, p)):
                t = _unit_toward(U[a], U[b])
                tn = N @ t
                val += 0.25 * (M[a, ei] * tn[ej] + M[a, ej] * tn[ei]) / norms[a]
            dtheta[p, q] = dtheta[q, p] = val
    return theta, dtheta


def reduce_angle(x):
    """Reduce angles modulo 2*pi into (-pi, pi]."""
    return np.pi - np.remainder(np.pi - np.asarray(x, dtype=float), 2 * np.pi)


def hinge_slots(c):
    """For each top: list of (p, q, hinge cell) over complementary vertex pairs."""
    d = c.dim
    out = []
    for t in range(c.n_tops):
        row = []
        for p, q in itertools.combinations(range(d + 1), 2):
            hpos = tuple(i for i in range(d + 1) if i not in (p, q))
            row.append((p, q, c.local_cell(t, hpos)))
        out.append(row)
    return out


def check_realizable(c, m: MetricData):
    for t in range(c.n_tops):
        Lm = m.local_sq(c, t)
        for size in range(2, c.dim + 2):
            for sub in itertools.combinations(range(c.dim + 1), size):
                G = Lm[np.ix_(sub, sub)]
                v2 = cayley_menger_sq_volume(G)
                mean = G[np.triu_indices(size, 1)].mean()
                if v2 < DEGENERACY * mean ** (size - 1):
                    raise GeometryError("DEGENERATE", f"top {t} has a degenerate face {sub}")


def raw_angle_sums(c, m: MetricData) -> np.ndarray:
    """Unreduced signed dihedral-angle sums around every hinge."""
    d = c.dim
    out = np.zeros(c.n_cells(d - 2))
    for t, row in enumerate(hinge_slots(c)):
        theta = dihedral_angles_sq(m.local_sq(c, t))
        for p, q, h in row:
            out[h] += m.eps[t] * theta[p, q]
    return out


def deficit_angles(c, m: MetricData) -> np.ndarray:
    """Deficit angle per hinge, reduced into (-pi, pi]."""
    check_realizable(c, m)
    return reduce_angle(raw_angle_sums(c, m))


def deficit_angles_coords(c, placement) -> np.ndarray:
    """Same sums computed from coordinates (independent path)."""
    d = c.dim
    out = np.zeros(c.n_cells(d - 2))
    for t, row in enumerate(hinge_slots(c)):
        X = placement.top_coords(c, t)
        eps = c.orient[t] * np.sign(signed_volume(X))
        for p, q, h in row:
            hpos = [i for i in range(d + 1) if i not in (p, q)]
            out[h] += eps * dihedral_angle(X, hpos)
    return reduce_angle(out)
