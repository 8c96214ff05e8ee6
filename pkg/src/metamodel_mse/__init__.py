"""Model-based vs model-free estimation of treatment-condition means under a sample budget."""

from .analytic import (
    MseBreakdown,
    cov_grandmean_beta_check,
    exact_linear_mse,
    modelfree_mse,
    nstar_exact,
    nstar_paper,
    rho_squared,
    theorem1_mse_paper,
)
from .design import Allocation, ConditionGrid, Factor, allocate_equal, build_grid
from .errors import ConfigError, InsufficientDataError, NumericalError, RankDeficientError
from .fit import BUILTIN_MODELS, FitResult, ModelSpec, direct_estimate, empirical_sq_loss, fit_ols, get_model
from .harness import SweepReport, detect_crossover, mc_mse, run_sweep
from .simulate import Dataset, McEstimate, SeedSpec, generate_dataset, sample_condition
from .truth import GroundTruth, grand_mean, preset_oud_like

__version__ = "0.1.0"
