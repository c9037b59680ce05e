"""Semiclassical scattering on asymptotically conic model manifolds.

Bicharacteristic flow, sojourn relations, leading-order scattering-matrix
assembly, near-diagonal WKB propagator amplitudes and Legendrian diagnostics,
with closed-form and quadrature oracles for validation.
"""

__version__ = "0.1.0"

from .errors import (CausticError, ChartDomainError, ConicScatError, ConventionError,
                     DegenerateGeodesicError, DerivativeError, DomainError, ExtrapolationError,
                     ForbiddenRegionError, GuardRadiusError, ModelError, ShootingError, TrappedError)
from .geometry import (MODEL_LABELS, SPEC_VERSION, PhasePoint, build_manifold, from_boundary_chart,
                       hamiltonian_eval, load_manifold, project_to_shell, to_boundary_chart)
from .flow import (BACKWARD, FORWARD, Trajectory, TrappingReport, detect_trapping,
                   integrate_bicharacteristic, integrate_jacobi, symplectic_form)
from .sojourn import SojournDatum, TotalSojourn, sojourn_end, sojourn_forward, total_sojourn
from .smatrix import (SMatrixEntry, assemble_smatrix, deflection_angle, find_connecting_geodesics,
                      impact_for_deflection, impact_shoot)
from .wkb import (amplitude0, amplitude1, geodesic_distance, transport_residual, wkb_amplitude,
                  wkb_kernel)
from .legendrian import (check_boundary_leaf, check_boundary_ratio, check_flow_commutation,
                         check_lagrangian, check_leaf_eikonal, check_quadratic_phase_map,
                         sample_flowout)
from . import oracle
