"""Deficit-angle torsion of flat piecewise-linear manifolds in three and four dimensions."""

from .complex_core import ComplexError, DeckGroup, SimplicialPreComplex, build_complex
from .developing import CoverPlacement, Representation, equivariant_placement, read_metric
from .torsion import TorsionReport, compute_invariant

__all__ = [
    "ComplexError", "DeckGroup", "SimplicialPreComplex", "build_complex",
    "CoverPlacement", "Representation", "equivariant_placement", "read_metric",
    "TorsionReport", "compute_invariant",
]
