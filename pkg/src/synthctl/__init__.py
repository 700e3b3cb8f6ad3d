"""Synthetic control estimation for daily panel data.

The pieces fit together in one direction: `panel` loads and cleans the data,
`donors` narrows the donor pool and the predictor list, `engine` fits one
synthetic control (driving the `weights` solver), `inference` wraps the fit in
placebo permutation tests, and `logistic` handles the growth-curve side of the
analysis. `cli` exposes all of it as subcommands.
"""

from .donors import (
    SelectionResult,
    abs_correlation,
    filter_by_cluster,
    filter_by_neighbor_states,
    select_predictors_naive,
    split_control_target,
)
from .engine import (
    Design,
    StudySpec,
    SynthResult,
    build_design,
    evaluate_v,
    fit_synth,
    inverse_variance_v,
    mspe,
    solve_v,
    split_pre_period,
)
from .errors import SynthctlError
from .inference import (
    PlaceboEnsemble,
    PlaceboEntry,
    SweepRow,
    p_value,
    placebo_run,
    post_pre_ratio,
    rmse_window,
    training_sweep,
)
from .logistic import (
    BinStat,
    LogisticFit,
    RegressionLine,
    classify_quadrant,
    decile_summary,
    fit_logistic,
    logistic_predict,
    theme_regression,
)
from .panel import (
    AgeBandData,
    CleaningPolicy,
    CleanResult,
    Panel,
    PredictorTable,
    UnitMeta,
    age_band_rate,
    clean_panel,
    clean_series,
    enforce_monotone,
    ingest_panel,
    join_on_key,
    load_metadata,
    load_predictors,
    repair_series,
    rolling_mean,
)
from .seeding import derive_seed
from .weights import (
    Regularization,
    SolveResult,
    SolverOptions,
    objective,
    project_simplex,
    solve_w,
    sparsify_and_resolve,
    sparsify_weights,
)

__version__ = "0.1.0"

__all__ = [
    "AgeBandData",
    "BinStat",
    "CleanResult",
    "CleaningPolicy",
    "Design",
    "LogisticFit",
    "Panel",
    "PlaceboEnsemble",
    "PlaceboEntry",
    "PredictorTable",
    "RegressionLine",
    "Regularization",
    "SelectionResult",
    "SolveResult",
    "SolverOptions",
    "StudySpec",
    "SweepRow",
    "SynthResult",
    "SynthctlError",
    "UnitMeta",
    "abs_correlation",
    "age_band_rate",
    "build_design",
    "classify_quadrant",
    "clean_panel",
    "clean_series",
    "decile_summary",
    "derive_seed",
    "enforce_monotone",
    "evaluate_v",
    "filter_by_cluster",
    "filter_by_neighbor_states",
    "fit_logistic",
    "fit_synth",
    "ingest_panel",
    "inverse_variance_v",
    "join_on_key",
    "load_metadata",
    "load_predictors",
    "logistic_predict",
    "mspe",
    "objective",
    "p_value",
    "placebo_run",
    "post_pre_ratio",
    "project_simplex",
    "repair_series",
    "rmse_window",
    "rolling_mean",
    "select_predictors_naive",
    "solve_v",
    "solve_w",
    "sparsify_and_resolve",
    "sparsify_weights",
    "split_control_target",
    "split_pre_period",
    "theme_regression",
    "training_sweep",
]
