"""Pseudo-spectral H1 geometry of area-preserving maps of the flat 2-torus."""

__version__ = "0.1.0"

from .errors import ConfigurationError, NumericalError, SympflowError
from .spectral import (Grid2D, Multiplier, PhysicalField, SpectrumField,
                       apply_multiplier, dealias, interpolate_at, transform)
from .fields import (SymplecticVectorField, VelocityField, casimir_q,
                     h1_inner, h1_norm, project_P, project_with_residual,
                     stream_from_casimir, to_velocity)
from .lieops import (Ad_group, AdDirection, Ad_star_field, Ad_star_matrix,
                     FlowMap, GalerkinBasis, K_op, ad, ad_matrix, ad_star,
                     lie_bracket)
from .geodesic import (DiagnosticsRecord, DiagnosticsReport, GeodesicState,
                       SolverConfig, SolverForm, Trajectory, diagnostics,
                       rhs_direct, rhs_vorticity, solve_geodesic, step_rk4)
from .jacobi import (ConjugatePoint, IndexResult, JacobiState, PhiMatrix,
                     PhiMethod, assemble_phi, assemble_phi_series,
                     detect_conjugate, index_check, jacobi_rhs,
                     omega_gamma_decomposition)
from . import cpn
