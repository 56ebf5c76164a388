"""Categorical return-distribution fixed points for tabular Markov reward processes.

Solve the categorical fixed point directly with one sparse linear system
(``dcfp_solve``) or by iterating the operator (``cdp_solve``), compare with
quantile dynamic programming, and measure errors against Monte Carlo returns.
"""

from .categorical import (
    CategoricalOperator,
    CdfTable,
    SupportGrid,
    build_operator,
    cdp_iterations,
    cdp_solve,
    dcfp_solve,
    make_grid,
    project_dirac,
    project_distribution,
    sparsity_profile,
    support_grid,
)
from .experiment import ExperimentConfig, ResultRow, bootstrap_ci, run_experiment, tradeoff_table
from .linsolve import SingularSystemError, SolveReport
from .metrics import DiscreteDistribution, cramer, sup_metric, wasserstein1
from .mrp import (
    ENV_NAMES,
    EmpiricalModel,
    GenerativeDataset,
    Mrp,
    build_env,
    empirical_model,
    load_mrp,
    sample_dataset,
    save_mrp,
)
from .oracle import mc_returns, truncation_horizon
from .quantile import QuantileTable, qdp_solve

__version__ = "0.1.0"
