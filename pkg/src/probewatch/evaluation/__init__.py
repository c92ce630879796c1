from probewatch.evaluation.compare import (
    BenchmarkRow,
    BenchmarkTable,
    ComparisonReport,
    benchmark,
    compare,
)
from probewatch.evaluation.metrics import (
    ConfusionMatrix,
    Metrics,
    confusion,
    f1_score,
    metrics,
)
from probewatch.evaluation.misuse import MisuseResult, misuse_detect, read_misuse_csv
from probewatch.evaluation.report import EvalReport, evaluate
from probewatch.evaluation.roc import roc_auc, roc_csv
from probewatch.evaluation.rules import (
    MisuseRule,
    default_rules,
    load_rules,
    parse_predicate,
    parse_rules,
)
