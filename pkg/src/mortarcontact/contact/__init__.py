"""Mortar-sampled barrier contact between a slave and a master surface."""
from .barrier import (EDGE, FACE, POINT, ContactInfeasible, adaptive_eps, barrier,
                      feature_weight, hermite_step, hermite_step_deriv)
from .potential import (contact_energy, contact_energy_grad_hess, contact_normal_force,
                        contact_pressure_field, nodal_contact_pressure, step_bounds,
                        step_filter)
from .quadrature import segment_rule, triangle_rule
from .sampling import (BarrierParams, ContactPairSet, ContactSample, ContactState,
                       build_candidate_pairs, build_contact_state, edge_kappa_compensation,
                       sample_edge, sample_face, sample_point)

__all__ = [
    "FACE", "EDGE", "POINT", "ContactInfeasible", "adaptive_eps", "barrier", "feature_weight",
    "hermite_step", "hermite_step_deriv", "contact_energy", "contact_energy_grad_hess",
    "contact_normal_force", "nodal_contact_pressure", "contact_pressure_field", "step_bounds", "step_filter",
    "segment_rule", "triangle_rule", "BarrierParams", "ContactPairSet", "ContactSample",
    "ContactState", "build_candidate_pairs", "build_contact_state", "edge_kappa_compensation",
    "sample_edge", "sample_face", "sample_point",
]
