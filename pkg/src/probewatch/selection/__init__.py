from probewatch.selection.filters import (
    anova_f_scores,
    chi_square_scores,
    correlation_prune,
    filter_select,
    target_correlation_select,
    target_correlations,
    top_k,
    tree_importance_scores,
)
from probewatch.selection.genetic import (
    GeneticConfig,
    GeneticResult,
    GeneticSearch,
    ga_wrapper_select,
)
from probewatch.selection.report import (
    FeatureSubset,
    PrunedPair,
    SelectionReport,
    SelectionStage,
)
