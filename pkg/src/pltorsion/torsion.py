"""Torsion of the 3D acyclic complex and the manifold invariant built from it."""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .developing import CoverPlacement, gauge_basis, read_metric
from .jacobians import assemble_A3, assemble_B3, numerical_rank
from .metric import cm_volume

log = logging.getLogger(__name__)


class TorsionError(ValueError):
    def __init__(self, code: str, message: str):
        super().__init__(f"{code}: {message}")
        self.code = code


def slogdet(M):
    """``(sign, log|det|)`` through pivoted LU; the empty determinant is 1."""
    M = np.asarray(M, float)
    if M.size == 0:
        return 1.0, 0.0
    sign, logabs = np.linalg.slogdet(M)
    return float(sign), float(logabs)


def select_C(A, tol: float = 1e-8, rng=None, scale: float | None = None) -> list:
    """Pivot set C with ``A|_C`` nonsingular and ``|C| = rank(A)``.

    Symmetric elimination: a diagonal pivot when some diagonal entry is not
    much smaller than the largest remaining entry, else a 2x2 block pivot
    on the largest off-diagonal entry.  With ``rng`` the diagonal pivot is
    drawn among the acceptable candidates, giving other admissible sets.
    """
    A = np.array(A, dtype=float)
    n = A.shape[0]
    if n == 0:
        return []
    r = numerical_rank(A, tol, scale)[0]
    S = A.copy()
    remaining = list(range(n))
    chosen = []
    while len(chosen) < r and remaining:
        sub = S[np.ix_(remaining, remaining)]
        diag = np.abs(np.diag(sub))
        omax = np.abs(sub).max()
        if diag.max() >= 0.5 * omax or r - len(chosen) == 1:
            cands = np.flatnonzero(diag >= 0.1 * diag.max())
            i = int(rng.choice(cands)) if rng is not None else int(np.argmax(diag))
            piv = [remaining[i]]
        else:
            off = np.abs(sub - np.diag(np.diag(sub)))
            i, j = np.unravel_index(np.argmax(off), off.shape)
            piv = [remaining[i], remaining[j]]
        rest = [x for x in remaining if x not in piv]
        P = S[np.ix_(piv, piv)]
        if rest:
            S[np.ix_(rest, rest)] -= S[np.ix_(rest, piv)] @ np.linalg.solve(P, S[np.ix_(piv, rest)])
        chosen += piv
        remaining = rest
    return sorted(chosen)


@dataclass
class TorsionReport:
    C: list
    C_bar: list
    det_A_C: tuple  # (sign, log|det|)
    det_B_Cbar: tuple
    tau: float
    log_abs_tau: float
    invariant: float | None = None
    log_invariant: float | None = None
    tolerances: dict = field(default_factory=dict)
    experimental_gauge: bool = False

    def to_dict(self) -> dict:
        return asdict(self)


def torsion3d(A, B, C, singular_rtol: float = 1e-10, scale: float | None = None) -> TorsionReport:
    """tau = det(B restricted to rows outside C)^2 / det(A restricted to C)."""
    A, B = np.asarray(A, float), np.asarray(B, float)
    n = A.shape[0]
    C = sorted(C)
    C_bar = [i for i in range(n) if i not in C]
    if len(C_bar) != B.shape[1]:
        raise TorsionError("SHAPE_MISMATCH",
                           f"|C_bar| = {len(C_bar)} but the gauge basis has {B.shape[1]} elements")
    AC = A[np.ix_(C, C)]
    if len(C):
        smin = np.linalg.svd(AC, compute_uv=False)[-1]
        ref = max(np.abs(A).max(), scale or 0.0)
        if smin < singular_rtol * ref:
            raise TorsionError("SINGULAR", f"A|_C is numerically singular (sigma_min={smin:.3e})")
    sa, la = slogdet(AC)
    sb, lb = slogdet(B[C_bar, :])
    if sb == 0:
        raise TorsionError("SINGULAR", "B restricted to C_bar is singular")
    log_tau = 2 * lb - la
    tau = sa * math.exp(log_tau)
    return TorsionReport(C, C_bar, (sa, la), (sb, lb), tau, log_tau,
                         tolerances={"rank_rtol": 1e-8, "singular_rtol": singular_rtol})


def quotient_volumes(c, m) -> np.ndarray:
    return np.array([cm_volume(c.dim, m.local_sq(c, t)) for t in range(c.n_tops)])


def invariant3d(c, m, report: TorsionReport) -> float:
    """|tau * prod(l^2 over edges) / prod(6 V over tetrahedra)|."""
    vols = quotient_volumes(c, m)
    if np.any(vols <= 0):
        raise TorsionError("SINGULAR", "a tetrahedron has zero volume")
    log_val = report.log_abs_tau + float(np.log(m.L).sum()) - float(np.log(6 * vols).sum())
    report.log_invariant = log_val
    report.invariant = math.exp(log_val)
    return report.invariant


def compute_invariant(c, placement: CoverPlacement, pivot_seed=None) -> TorsionReport:
    """Assemble A and B, choose C and evaluate tau and the invariant."""
    m = read_metric(c, placement)
    A = assemble_A3(c, m, placement=placement)
    scale = float(np.abs(assemble_A3(c, m, absolute=True, placement=placement)).max())
    basis = gauge_basis(placement)
    B = assemble_B3(c, placement, basis)
    rng = np.random.default_rng(pivot_seed) if pivot_seed is not None else None
    C = select_C(A, rng=rng, scale=scale)
    report = torsion3d(A, B, C, scale=scale)
    invariant3d(c, m, report)
    report.experimental_gauge = placement.rep.kind == "trivial"
    if report.tau < 0:
        log.info("tau is negative (%.6g); reporting absolute invariant", report.tau)
    return report
