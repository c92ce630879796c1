from probewatch.dataset.builders import (
    FlowSummary,
    build_feature_table,
    describe_flows,
    flow_tables,
)
from probewatch.dataset.csvio import from_csv, schema_json, to_csv
from probewatch.dataset.labels import (
    ConflictReport,
    LabelSet,
    LabelSource,
    combine_labels,
)
from probewatch.dataset.preprocess import (
    DropReport,
    Imputer,
    MinMaxScaler,
    categorical_domains,
    drop_uninformative,
    impute,
    merge_feature_sets,
    one_hot_encode,
    sample_rows,
    scale,
)
from probewatch.dataset.split import split
from probewatch.dataset.table import (
    Column,
    ColumnKind,
    FeatureTable,
    Origin,
    table_from_records,
)
from probewatch.dataset.unsw import load_unsw_csv
