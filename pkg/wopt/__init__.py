"""
wopt - 一维隐空间下 W1 最优 Lipschitz 生成器

构造经验测度的最优 K-Lipschitz 生成器（一维精确解与多维覆盖路径解），
给出 W1 闭式值，用独立的最优传输计算校验，并复现收敛速率实验。
"""

__version__ = '0.1.0'

from .errors import (
    WoptError,
    DomainError,
    DimensionError,
    ConstraintError,
    SizeError,
    WalkValidationError,
    ConstructionError,
    ConvergenceError,
    ConfigError,
    ExperimentError,
)
from .cloud import SampleCloud
from .measure import DiscreteMeasure
from .generator import (
    PiecewiseLinearGenerator,
    evaluate_generator,
    pushforward_discretize,
    validate_lipschitz,
    reflect_generator,
    perturb_plateaus,
)
from .univariate import (
    UnivariateOptimum,
    k1_lower_bound,
    build_gstar_1d,
    w1_closed_form_1d,
    fixed_k_optimum_1d,
)
from .path_solver import (
    ClosureMatrix,
    WalkSolution,
    squared_metric_closure,
    exact_covering_walk,
    brute_force_walk,
    heuristic_covering_walk,
    solve_covering_walk,
    k2_lower_bound,
)
from .multivariate import (
    MultivariateOptimum,
    dwell_times,
    build_gstar_md,
    w1_closed_form_md,
    voronoi_occupancy,
    check_lip_circ,
    compare_competitor,
)
from .semidiscrete import (
    WeightedVoronoi,
    CellAssignment,
    cell_of_point,
    adapted_weights,
    transport_map_apply,
    transport_cost_estimate,
)
from .oracle import w1_discrete_exact, w1_1d_quantile, w1_generator_vs_empirical
from .cell import ExperimentCell, CellStatus
from .runner import execute_cells_parallel, get_config_var, get_status_summary, setup_logging
from .experiments import (
    TargetDistribution,
    ExperimentConfig,
    ExperimentRow,
    sample_target,
    run_rates,
    run_heatmap,
    estimate_slope,
    emit_outputs,
)
