"""Stress-test black-box tabular predictors with Wasserstein moment projections.

The pipeline: load a tabular dataset, pick a moment constraint (a stressed
feature mean, a second moment, a cross moment, ...), calibrate the
multiplier that transports the sample onto the constraint set at minimal
squared displacement, then watch how model responses and fairness measures
move as the stress level sweeps a quantile-anchored grid.
"""

from .constraints import (
    CROSS_PRODUCT,
    EQUALITY,
    INEQUALITY_GE,
    LINEAR,
    LINEAR_CROSS,
    LINEAR_QUADRATIC,
    NORM,
    QUADRATIC,
    ConstraintSpec,
    MultiplierDomain,
    multiplier_domain,
    numeric_transport,
    phi_eval,
    transport_map,
)
from .dataset import (
    ColumnStat,
    DatasetError,
    EmpiricalDataset,
    column_mean,
    column_stat,
    empirical_quantile,
    load_csv,
    split,
)
from .metrics import (
    GroupCounts,
    MetricSeries,
    disparate_impact,
    group_counts,
    pp1,
    reg_mean_var,
    series_over_sweep,
)
from .models import (
    CLASSIFICATION,
    REGRESSION,
    ExternalModel,
    external_model,
    fit_naive_bayes,
    fit_tree,
    predict,
    threshold_model,
)
from .projection import (
    OptimalityReport,
    ProjectedDataset,
    consistency_curve,
    exact_w2_small,
    optimality_check,
    project,
)
from .solver import (
    DomainHitError,
    DualCertificate,
    MaxIterationsError,
    Multiplier,
    NotAttainableError,
    SolverError,
    certify,
    dual_objective,
    solve_equality,
    solve_inequality,
)
from .stress import StressSweep, SweepResult, make_sweep, run_sweep, stress_target

__version__ = "0.1.0"
