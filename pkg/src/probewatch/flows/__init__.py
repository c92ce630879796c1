from probewatch.flows.assembler import (
    FlowAssembler,
    FlowKey,
    FlowRecord,
    FlowState,
    assemble_flows,
    flow_state,
)
from probewatch.flows.features import (
    FLOW_FEATURES,
    SESSION_FEATURES,
    FlowFeatureVector,
    extract_flow_features,
    pc_ratio,
)
