"""Decentralized maximum-likelihood estimation by synchronization of coupled dynamical systems."""
from .bounds import (CouplingBounds, chi_cdf, coupling_bounds, non_sync_probability_bound,
                     scalar_bounds, vector_bounds)
from .coupling import LINEAR, SIN, TANH, CouplingFunction, compute_g, get_coupling, validate_a2
from .dynamics import (NoFixedPointError, ScalarNetwork, SimulationError, Trajectory,
                       VectorNetwork, predicted_state, simulate, solve_equilibrium,
                       solve_equilibrium_vector, suggest_dt)
from .estimation import (ScalarObservationModel, VectorObservationModel, centralized_ml_scalar,
                         centralized_ml_vector, configure_scalar, configure_vector)
from .experiments import ClusterReport, ConfigError, ExperimentConfig, run_experiment
from .graph import GraphError, Topology, algebraic_connectivity, weighted_laplacian
from .kernels import ACTIVE_BACKEND

__version__ = "0.1.0"
