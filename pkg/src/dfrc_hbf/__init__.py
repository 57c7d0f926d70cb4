"""Joint hybrid beamforming and radar-receiver design for DPS-based mmWave DFRC systems."""

from .algorithms import (
    ConvergenceTrace,
    SolveResult,
    ThresholdInfeasible,
    consensus_admm,
    detection_probability,
    initial_state,
    thereon,
    thereon_mu_miso,
)
from .comm import MuMisoProblem, spectral_efficiency
from .kernels import build_phi_kernels, build_theta_kernels, monte_carlo_sinr
from .model import (
    DpsAnalogPrecoder,
    RadarScene,
    SystemConfig,
    build_scene,
    exponential_covariance,
    generate_geometric_channel,
    steering_vector,
)
from .estimator import HybridBeamformer, MuMisoHybridBeamformer
from .solvers import AdmmState, ProblemSpec, RadarConstraintUnreachable

__version__ = "0.1.0"
