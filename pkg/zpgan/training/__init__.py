from zpgan.training.checkpoint import load_checkpoint, save_checkpoint
from zpgan.training.schemas import (
    CheckpointMeta,
    GridCellResult,
    GridResults,
    GridSpec,
    StepLog,
    TrainConfig,
    TrainLog,
)
from zpgan.training.services import Batch, Trainer, make_batch, train, train_step
from zpgan.training.grid import grid_search, rank_cells, save_grid_results
from zpgan.training.ablation import default_variants, run_ablation, save_ablation
