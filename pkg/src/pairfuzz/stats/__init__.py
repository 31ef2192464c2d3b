"""Statistics for interaction datasets and strategy comparisons."""

from .compare import (MannWhitneyResult, TimeToThreshold, first_reach, mann_whitney_one_sided,
                      median_with_infinity, time_to_threshold, vargha_delaney)
from .linear import (AnovaResult, DegenerateDesignError, ModelFit, PairDataset, PairObservation,
                     ResidualDiagnostics, anova_interaction_test, fit_linear_model,
                     interaction_report, residual_diagnostics, write_residuals_csv)
from .report import analyze_directory, goodness_of_fit_table, stars

__all__ = [
    "AnovaResult", "DegenerateDesignError", "MannWhitneyResult", "ModelFit", "PairDataset",
    "PairObservation", "ResidualDiagnostics", "TimeToThreshold", "analyze_directory",
    "anova_interaction_test", "first_reach", "fit_linear_model", "goodness_of_fit_table",
    "interaction_report", "mann_whitney_one_sided", "median_with_infinity",
    "residual_diagnostics", "stars", "time_to_threshold", "vargha_delaney",
    "write_residuals_csv",
]
