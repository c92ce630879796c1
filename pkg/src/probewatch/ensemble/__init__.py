from probewatch.ensemble.bagging import (
    BaggingModel,
    BaggingSpec,
    Member,
    fit_bagging,
    fit_bagging_table,
)
from probewatch.ensemble.tuning import Trial, TuningResult, random_search_tune, spec_for
from probewatch.ensemble.presets import BENCHMARK_KINDS, DATASETS, bagging_preset
