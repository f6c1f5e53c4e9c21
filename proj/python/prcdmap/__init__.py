"""Python bindings for the PRCD-MAP causal-discovery core."""

from ._core import (  # noqa: F401
    TAU_MIN,
    TAU_MAX,
    ConstraintDomainError,
    DimensionError,
    FitResult,
    GroundTruth,
    MetricsReport,
    ParameterError,
    PriorMatrix,
    TimeSeriesData,
    WeightStack,
    auroc,
    best_f1,
    calibrate_grouped,
    dag_penalty,
    fit,
    generate_ba_graph,
    generate_er_dag,
    generate_lag_matrices,
    group_edges_by_quantile,
    huber_loss,
    l1_weights,
    load_prior,
    make_prior,
    precision_mask,
    rho_cons,
    save_prior_csv,
    score,
    shd,
    simulate_lorenz96,
    spearman_precalibrate,
    simulate_svar,
    standardize,
)

__all__ = [n for n in dir() if not n.startswith("_")]
