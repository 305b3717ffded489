"""Uncertainty-robust Kalman-Bucy filtering.

Simulates a linear-Gaussian signal/observation pair, runs the Kalman-Bucy
filter, solves an HJB equation for the parameter-uncertainty penalty in a
moving frame, and turns the solved penalty into robust (upper/lower/minimax)
estimates of functionals of the hidden signal.
"""

from .errors import ConfigError, MissingInputError, NumericalError
from .model import (CallPayoff, Constant, Functional, Gain, Identity,
                    ModelParameters, Negated, PenaltyConfig,
                    ReferenceParameters, Square, Tabulated, initial_cost,
                    negate, running_cost)
from .simulate import SamplePath, eta_path, simulate_paths
from .kalman import FilterTrajectory, riccati_closed_form, run_filter
from .frame import (FrameNode, FrameTrajectory, StateVector, dynamics_f,
                    from_state, reference_frame, to_state)
from .hjb import (GridSpec, LambdaField, kappa_lookup, pointwise_hamiltonian,
                  solve_lambda, write_snapshots)
from .expect import (GaussianCandidate, gaussian_functional,
                     gaussian_functional_quadrature, lower_expectation,
                     minimax_estimate, payoff_moments, upper_expectation)
from .oracle import (BackwardResult, ControlPair, brute_force_value,
                     integrate_trajectory_backward)
from .config import ExperimentConfig, parse_config
from .pipeline import run_experiment

__version__ = "0.1.0"
