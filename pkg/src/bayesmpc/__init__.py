"""Kernel-based Bayesian system identification and uncertainty-aware MPC.

The library fits Gaussian-regression models of dynamic systems, tunes their
hyperparameters by empirical Bayes, and turns the resulting posterior into
control inputs that minimize the posterior-mean tracking cost over a finite
horizon.  A Monte Carlo harness compares the uncertainty-aware controller
against certainty-equivalent and oracle baselines.
"""

from .backend import USING_EXTENSION, implementation_name
from .control import (
    ControlSolution,
    MpcProblem,
    bsp_optimal_input,
    narx_cost,
    narx_rollout,
    nfir_cost,
    nominal_input,
    optimize_narx_input,
)
from .experiment import (
    ExperimentConfig,
    ExperimentResult,
    RealizedCost,
    RunRecord,
    realized_cost,
    run_experiment,
)
from .kernels import KernelSpec, cross_kernel, eval_kernel, gram_matrix, tc_covariance, tc_kernel_spec
from .moments import (
    PredictorMoments,
    bivariate_moment,
    closed_form_moments,
    monte_carlo_moments,
    plugin_moments,
)
from .predictor import MultistepMatrices, build_multistep, oracle_input
from .regression import (
    Dataset,
    GpPosterior,
    ThetaBelief,
    augment_posterior,
    fit_posterior,
    linear_posterior,
    log_marginal_likelihood,
    posterior_mean,
    posterior_variance,
)
from .tuning import (
    TuningResult,
    degrees_of_freedom,
    empirical_bayes,
    hat_matrix,
    schedule_gamma,
    wsrr,
    wssu,
)

__version__ = "0.1.0"

__all__ = [
    "ControlSolution",
    "Dataset",
    "ExperimentConfig",
    "ExperimentResult",
    "GpPosterior",
    "KernelSpec",
    "MpcProblem",
    "MultistepMatrices",
    "PredictorMoments",
    "RealizedCost",
    "RunRecord",
    "ThetaBelief",
    "TuningResult",
    "USING_EXTENSION",
    "augment_posterior",
    "bivariate_moment",
    "bsp_optimal_input",
    "build_multistep",
    "closed_form_moments",
    "cross_kernel",
    "degrees_of_freedom",
    "empirical_bayes",
    "eval_kernel",
    "fit_posterior",
    "gram_matrix",
    "hat_matrix",
    "implementation_name",
    "linear_posterior",
    "log_marginal_likelihood",
    "monte_carlo_moments",
    "narx_cost",
    "narx_rollout",
    "nfir_cost",
    "nominal_input",
    "optimize_narx_input",
    "oracle_input",
    "plugin_moments",
    "posterior_mean",
    "posterior_variance",
    "realized_cost",
    "run_experiment",
    "schedule_gamma",
    "tc_covariance",
    "tc_kernel_spec",
    "wsrr",
    "wssu",
]
