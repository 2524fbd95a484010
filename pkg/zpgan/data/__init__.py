from zpgan.data.schemas import (
    COND_DIM,
    HEIGHT,
    WIDTH,
    ConditioningVector,
    Dataset,
    DatasetStats,
    GroupStats,
    Sample,
    SynthProfile,
)
from zpgan.data.services import (
    compute_stats,
    load_dataset,
    load_stats,
    save_dataset,
    save_stats,
    split,
    synth_dataset,
)
from zpgan.data.utils import find_max_pixel, find_max_pixels, intensity, validate_response
