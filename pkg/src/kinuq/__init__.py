"""Multifidelity uncertainty quantification for collisional plasma kinetics.

Deterministic kinetic solvers (Landau and Fokker-Planck collisions with
self-consistent electric fields, plus the Euler-Poisson fluid limit),
collision-model calibration, a variance-reduced Monte Carlo estimator with
optimal control-variate weights, and an on-disk sample archive tying the
pieces together.
"""

__version__ = "0.1.0"

from .errors import KinuqError, SolverAbort, ValidationError
from .fields import (
    DistField,
    MomentSet,
    PhaseGrid,
    RandomSpace,
    draw_parameters,
    entropy_of,
    maxwellian_eval,
    moments_of,
)
from .collision import (
    FpOperator,
    PenalizationConfig,
    SpectralPlan,
    fp_equilibrium,
    fp_p,
    fp_steady_state,
    implicit_fp_solve,
    landau_q,
    penalized_rhs,
)
from .transport import PoissonConfig, efield_from_phi, poisson_solve, weno_flux_v, weno_flux_x
from .timestep import ImexTableau, StageOps, StepConfig, cfl_dt, get_tableau, imex_step
from .models import (
    InitialCondition,
    ModelRun,
    Trajectory,
    default_x_bounds,
    initial_condition_eval,
    random_space,
    run_ep,
    run_model,
    run_vpfp,
    run_vpl,
)
from .vrmc import (
    CvWeights,
    EstimatorResult,
    aggregate_covariances,
    estimate_covariances,
    l1_error,
    optimal_weights,
    vrmc_estimate,
    zeta,
)
from .calibrate import calibrate_mu, model_discrepancy
from .archive import (
    ArchiveWriter,
    SampleArchive,
    read_mean,
    read_sample,
    validate_archive,
    validate_pairing,
    write_sample,
)

__all__ = [
    "KinuqError",
    "SolverAbort",
    "ValidationError",
    "DistField",
    "MomentSet",
    "PhaseGrid",
    "RandomSpace",
    "draw_parameters",
    "entropy_of",
    "maxwellian_eval",
    "moments_of",
    "FpOperator",
    "PenalizationConfig",
    "SpectralPlan",
    "fp_equilibrium",
    "fp_p",
    "fp_steady_state",
    "implicit_fp_solve",
    "landau_q",
    "penalized_rhs",
    "PoissonConfig",
    "efield_from_phi",
    "poisson_solve",
    "weno_flux_v",
    "weno_flux_x",
    "ImexTableau",
    "StageOps",
    "StepConfig",
    "cfl_dt",
    "get_tableau",
    "imex_step",
    "InitialCondition",
    "ModelRun",
    "Trajectory",
    "default_x_bounds",
    "initial_condition_eval",
    "random_space",
    "run_ep",
    "run_model",
    "run_vpfp",
    "run_vpl",
    "CvWeights",
    "EstimatorResult",
    "aggregate_covariances",
    "estimate_covariances",
    "l1_error",
    "optimal_weights",
    "vrmc_estimate",
    "zeta",
    "calibrate_mu",
    "model_discrepancy",
    "ArchiveWriter",
    "SampleArchive",
    "read_mean",
    "read_sample",
    "validate_archive",
    "validate_pairing",
    "write_sample",
]
