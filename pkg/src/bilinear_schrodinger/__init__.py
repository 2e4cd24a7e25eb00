"""Galerkin toolkit for the bilinear Schrodinger equation on (0, 1).

Eigenbasis, couplings, propagation, moment-based control synthesis, local
steering and an entropy probe of the reachable set.
"""

from .controls import ControlSignal, fourier_moment, theta_norm
from .coupling import CouplingMatrix, check_condition, check_condition_i, check_condition_ii, coupling_matrix
from .entropy import (ControlBallSample, EntropyConfig, EntropyReport, covering_number, entropy_report,
                      reachable_cloud, sample_control_ball)
from .errors import Diverged, IllConditioned, NumericalFailure, ObstructedState, ValidationError
from .moments import (MomentTable, linearized_endpoint, obstruction_invariant, synthesize_control,
                      target_to_moments)
from .propagator import Trajectory, free_evolution, linearized_propagate, propagate
from .return_times import find_return_time, verify_return
from .spectral import (EigenSystem, Potential, StateCoeffs, hs_norm, solve_sturm_liouville,
                       tensor_eigensystem)
from .steering import SteeringConfig, SteeringRun, lift, newton_control, project_tangent

__version__ = "0.1.0"

__all__ = [
    "ControlSignal", "fourier_moment", "theta_norm",
    "CouplingMatrix", "check_condition", "check_condition_i", "check_condition_ii", "coupling_matrix",
    "ControlBallSample", "EntropyConfig", "EntropyReport", "covering_number", "entropy_report",
    "reachable_cloud", "sample_control_ball",
    "Diverged", "IllConditioned", "NumericalFailure", "ObstructedState", "ValidationError",
    "MomentTable", "linearized_endpoint", "obstruction_invariant", "synthesize_control", "target_to_moments",
    "Trajectory", "free_evolution", "linearized_propagate", "propagate",
    "find_return_time", "verify_return",
    "EigenSystem", "Potential", "StateCoeffs", "hs_norm", "solve_sturm_liouville", "tensor_eigensystem",
    "SteeringConfig", "SteeringRun", "lift", "newton_control", "project_tangent",
]
