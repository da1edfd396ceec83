"""Numerical laboratory for Cheeger-Gromoll type metrics on tangent bundles.

Charts carry metrics evaluated with truncated Taylor jets. Maps between
charts lift to their differentials ``Phi = phi_*``, and the certifier
decides at sampled bundle points whether ``Phi`` is horizontally conformal
or a harmonic morphism.
"""

from .bundle import BundlePoint, CGParams, SecondTangent, cg_inner, cg_matrix, verify_levi_civita
from .catalog import chart, make_map
from .certify import certify_harmonic_morphism, evaluate_theorem_conditions, maint_agreement
from .geometry import Chart, Point, Tangent, VectorField
from .lift import LiftedMap
from .maps import MapJet

__all__ = [
    "BundlePoint",
    "CGParams",
    "Chart",
    "LiftedMap",
    "MapJet",
    "Point",
    "SecondTangent",
    "Tangent",
    "VectorField",
    "certify_harmonic_morphism",
    "cg_inner",
    "cg_matrix",
    "chart",
    "evaluate_theorem_conditions",
    "maint_agreement",
    "make_map",
    "verify_levi_civita",
]
