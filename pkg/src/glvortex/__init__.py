"""Symmetric vortex solver and verifier for two-component Ginzburg-Landau
systems: radial profiles f_pm(r) for a given coefficient set and degree pair,
plus quantitative checks (quantization, amplitude bound, tail asymptotics,
certified envelopes, second variation, monotonicity)."""

from .asymptotics import (DefectSeries, EnvelopeSpec, IllConditionedFit,
                          SelectionFailed, TailExpansion, TailFit,
                          derivative_tail_check, envelope_check,
                          expand_defect_series, leading_coeffs, second_coeffs,
                          select_envelope, tail_fit)
from .diagnostics import (EigenFailure, IdentityReport, MonotonicityClass,
                          MonotonicityLabel, amplitude_bound_check,
                          identity_report, monotonicity_classify,
                          near_origin_order, pohozaev_residual,
                          quantization_check, radial_energy,
                          second_variation_min_eig)
from .grid import (BadBoundarySpec, BadGridSpec, LengthMismatch, RadialGrid,
                   RadialOperator, build_grid, quadrature, radial_operator)
from .model import (BecParams, CouplingParams, DegreePair, DerivedBounds,
                    HypothesisViolation, NonPositiveDensity, bec_to_gl,
                    derived_bounds, normalize_degrees, validate)
from .solver import (NoConvergence, Profile, SingularJacobian, SolveOptions,
                     SolveReport, continuation_solve, initial_guess, jacobian,
                     newton_solve, profile_from_json, profile_to_json,
                     residual, residual_norm, uniqueness_probe)

__version__ = "0.1.0"
