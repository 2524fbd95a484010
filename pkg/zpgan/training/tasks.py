# zpgan/training/tasks.py
import logging

from zpgan.data.services import load_dataset, split
from zpgan.evaluation.schemas import EvalConfig
from zpgan.losses.schemas import LossWeights
from zpgan.training.grid import run_cell
from zpgan.training.schemas import TrainConfig
from zpgan.worker import celery_app

logger = logging.getLogger(__name__)


@celery_app.task(name="grid.run_cell")
def run_grid_cell(payload: dict) -> dict:
    """
    Celery entrypoint for one grid cell. The payload is plain JSON: the dataset
    travels as a directory path and is split again on the worker.
    """
    logger.info("[Celery] grid cell %s from %s", payload["cell_index"], payload["data_dir"])
    dataset = load_dataset(payload["data_dir"])
    train_set, test_set = split(dataset, payload["split_ratio"], payload["split_seed"])
    result = run_cell(
        train_set,
        test_set,
        TrainConfig.model_validate(payload["base_config"]),
        payload["cell_index"],
        LossWeights.model_validate(payload["weights"]),
        payload["runs_per_cell"],
        EvalConfig.model_validate(payload["eval_config"]),
    )
    return result.model_dump(mode="json")
