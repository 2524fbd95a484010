from zpgan.evaluation.schemas import (
    ChannelGeometry,
    ChannelHistogram,
    ChannelValues,
    EvalConfig,
    EvalReport,
)
from zpgan.evaluation.services import (
    channel_histograms,
    channel_matrix,
    compare_responses,
    evaluate_model,
    extract_channels,
    generate_for_groups,
    read_report,
    write_report,
    ws1,
)
