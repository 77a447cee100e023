"""Collective-spin metrology: squeezing and Fisher information of N-qubit states.

The package simulates one-axis-twisting and XY dynamics, samples collective
spin measurements, reconstructs linear and nonlinear squeezing parameters
from measured moments, and extracts Fisher information from Hellinger
distances.
"""

__version__ = "0.1.0"

from .dynamics import CouplingMatrix, Hamiltonian, build_oat, build_xy, evolve, trajectory, uniform_equivalence_report
from .errors import ConfigError, SpinMetroError
from .fisher import (
    FisherEstimate,
    OutcomeDistribution,
    classical_fisher,
    fisher_exact,
    fisher_exact_fit,
    fisher_fit,
    fisher_sampled,
    fisher_single,
    hellinger_sq,
    imprint,
    max_classical_fisher,
    optimize_alpha,
    pz,
    qfi_pure,
)
from .husimi import SphericalGrid, husimi_q, spherical_grid
from .measurement import (
    ConfusionModel,
    MomentTable,
    ShotRecord,
    apply_confusion,
    correct_readout,
    estimate_moments,
    exact_moments,
    sample_readout,
)
from .spin import (
    Representation,
    StateVector,
    coherent_spin_state,
    collective_operator,
    dicke_state,
    ghz_state,
    random_symmetric_state,
    rotate,
    spin_mean_and_covariance,
)
from .squeezing import FAMILIES, SqueezeReport, hierarchy_scan, squeeze_parameter, vc_exact, vc_from_moments

__all__ = [name for name in dir() if not name.startswith("_")]
