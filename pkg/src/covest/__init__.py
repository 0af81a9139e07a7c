"""Estimation for linear models with uncertain covariance matrices.

Library layout:

- ``distributions``: seeded streams, Gaussian and inverse-Wishart sampling
- ``model``: problem specification, channel setup, scenario generation
- ``estimators``: mvu / map / cmap / mmap / vmap / dre point estimators
- ``gibbs``: posterior-mean oracle by Gibbs sampling
- ``montecarlo``: reproducible benchmark engine and persistence
- ``scenarios``: named experiment presets with reference tables
- ``cli``: the ``covest`` command
"""

__version__ = "0.1.0"

from .distributions import (
    InverseWishartParams,
    RngStream,
    logpdf_inverse_wishart,
    sample_gaussian,
    sample_inverse_wishart,
)
from .errors import (
    CovestError,
    Diverged,
    EmptySample,
    InvalidDimension,
    NotPositiveDefinite,
    SchemaMismatch,
    SingularNormalEquations,
    UnknownScenario,
    ZeroMeanRequired,
)
from .estimators import (
    DreBounds,
    EstimateResult,
    SolverOptions,
    cost_V,
    covariance_updates,
    dre_bounds_heuristic,
    estimate_cmap,
    estimate_cmap_gd,
    estimate_dre,
    estimate_map,
    estimate_mmap,
    estimate_mvu,
    estimate_vmap,
    fixed_point_step,
    grad_V,
)
from .gibbs import GibbsConfig, gibbs_posterior_mean
from .model import (
    GroundTruth,
    ProblemSpec,
    build_mimo_spec,
    draw_scenario,
    expected_signal_energy,
    load_spec,
    save_spec,
    snr_of,
    spec_from_dict,
    spec_to_dict,
    training_sequence,
)
from .montecarlo import (
    ExperimentConfig,
    ExperimentResult,
    GridPointResult,
    TrialRecord,
    ccdf,
    iteration_stats,
    load_experiment,
    run_experiment,
    run_trial,
    save_experiment,
)
from .scenarios import Scenario, build_scenario, scenario_names

__all__ = [name for name in dir() if not name.startswith("_")]
