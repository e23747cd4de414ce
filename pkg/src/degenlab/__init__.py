"""Numerical laboratory for degenerate diffusion operators H = -div(C grad) near a boundary.

Boundary-layer geometry, degenerate coefficient fields, logarithmic cutoffs,
discrete Hardy/Rellich quotients, limit-point classification and uniqueness
verdicts.
"""
from .coefficients import CoefficientField, Perturbation, Profile, comparability, verify_degeneracy_conditions
from .geometry import DomainSpec, LayerSpec, distance, grad_distance, hessian_trace, verify_trace_bound
from .grid import assemble, build_grid, grid_for
from .mollifier import Mollifier, chi, h_eta_bound, measure_alpha
from .spectral import deficiency_indices, hardy_min, rellich_min, weyl_classify
from .uniqueness import classify, evolve, mass_conservation_test, witness

__all__ = [
    "CoefficientField", "Perturbation", "Profile", "comparability", "verify_degeneracy_conditions",
    "DomainSpec", "LayerSpec", "distance", "grad_distance", "hessian_trace", "verify_trace_bound",
    "assemble", "build_grid", "grid_for",
    "Mollifier", "chi", "h_eta_bound", "measure_alpha",
    "deficiency_indices", "hardy_min", "rellich_min", "weyl_classify",
    "classify", "evolve", "mass_conservation_test", "witness",
]
