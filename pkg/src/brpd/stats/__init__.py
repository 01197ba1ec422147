"""Cohort statistics: normality, mixed ANOVA, post-hoc tests, correlations."""

from .anova import (
    CHANNELS,
    TASKS,
    AnovaRow,
    AnovaTable,
    CohortMatrix,
    PairwiseComparison,
    bonferroni_from_summary,
    bonferroni_groups,
    bonferroni_pairwise,
    mixed_anova,
    split_plot_anova,
)
from .correlation import CorrelationMatrix, fisher_pool, pearson_matrix
from .descriptive import Descriptives, describe
from .normality import (
    LILLIEFORS_CENSOR,
    NormalityReport,
    dallal_wilkinson_pvalue,
    ks_normal_distance,
    lilliefors_ks,
    normality_report,
    shapiro_wilk,
)

__all__ = [
    "CHANNELS", "TASKS", "AnovaRow", "AnovaTable", "CohortMatrix", "PairwiseComparison",
    "bonferroni_from_summary", "bonferroni_groups", "bonferroni_pairwise", "mixed_anova",
    "split_plot_anova", "CorrelationMatrix", "fisher_pool", "pearson_matrix", "Descriptives",
    "describe", "LILLIEFORS_CENSOR", "NormalityReport", "dallal_wilkinson_pvalue",
    "ks_normal_distance", "lilliefors_ks", "normality_report", "shapiro_wilk",
]
