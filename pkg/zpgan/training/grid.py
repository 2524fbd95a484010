# zpgan/training/grid.py
import logging
import multiprocessing
import os
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import List, Optional, Union

import numpy as np

from zpgan.core.exceptions import ConfigError, ZpganError
from zpgan.data.schemas import Dataset
from zpgan.data.services import split
from zpgan.evaluation.schemas import EvalConfig
from zpgan.evaluation.services import evaluate_model
from zpgan.losses.schemas import LossWeights
from zpgan.training.schemas import (
    DEFAULT_RUNS_PER_CELL,
    GridCellResult,
    GridResults,
    GridSpec,
    TrainConfig,
)
from zpgan.training.services import train

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]
RESULTS_FILE = "grid_results.json"
DEFAULT_SPLIT_RATIO = 0.8


def cell_seed(base_seed: int, cell_index: int, run_index: int) -> int:
    return base_seed + cell_index * 1000 + run_index


def run_cell(
    train_set: Dataset,
    test_set: Dataset,
    base_config: TrainConfig,
    cell_index: int,
    weights: LossWeights,
    runs_per_cell: int,
    eval_config: EvalConfig,
) -> GridCellResult:
    """Train and score one lambda combination; failures are reported, not raised."""
    result = GridCellResult(
        cell_index=cell_index,
        lambda_div=weights.lambda_div,
        lambda_in=weights.lambda_in,
        lambda_aux=weights.lambda_aux,
    )
    logger.info("cell %s start: div=%g in=%g aux=%g", cell_index, weights.lambda_div, weights.lambda_in, weights.lambda_aux)
    try:
        for run in range(runs_per_cell):
            seed = cell_seed(base_config.seed, cell_index, run)
            config = base_config.model_copy(update={"weights": weights, "seed": seed})
            params, _ = train(train_set, config)
            report = evaluate_model(
                params,
                test_set,
                eval_config.samples_per_condition,
                seed=seed,
                n_bins=eval_config.n_bins,
                geometry=eval_config.geometry,
            )
            result.run_ws.append(report.mean_ws)
    except (ZpganError, ValueError, RuntimeError, ArithmeticError) as exc:
        logger.exception("cell %s failed", cell_index)
        result.status = "failed"
        result.error = str(exc)
        return result

    ws = np.asarray(result.run_ws)
    result.mean_ws = float(ws.mean())
    result.std_ws = float(ws.std())
    result.min_ws = float(ws.min())
    logger.info("cell %s done: mean WS %.6g (std %.3g)", cell_index, result.mean_ws, result.std_ws)
    return result


def rank_cells(cells: List[GridCellResult]) -> List[GridCellResult]:
    """Ascending mean WS (ties by cell index); failed cells go last without a rank."""
    ok = sorted((c for c in cells if c.status == "ok"), key=lambda c: (c.mean_ws, c.cell_index))
    failed = sorted((c for c in cells if c.status != "ok"), key=lambda c: c.cell_index)
    for rank, cell in enumerate(ok, start=1):
        cell.rank = rank
    return ok + failed


def _resolve_jobs(jobs: int) -> int:
    return jobs if jobs > 0 else (os.cpu_count() or 1)


def grid_search(
    dataset: Dataset,
    base_config: TrainConfig,
    grid: Optional[GridSpec] = None,
    runs_per_cell: int = DEFAULT_RUNS_PER_CELL,
    eval_config: Optional[EvalConfig] = None,
    split_ratio: float = DEFAULT_SPLIT_RATIO,
    split_seed: Optional[int] = None,
    jobs: int = 1,
    backend: str = "local",
    data_dir: Optional[PathLike] = None,
) -> GridResults:
    """Sweep every (lambda_div, lambda_in, lambda_aux) cell, scoring each on the test split.

    backend="local" runs cells in a process pool of `jobs` workers (in-process for
    jobs=1); backend="celery" sends one task per cell and needs `data_dir`.
    """
    if runs_per_cell < 1:
        raise ValueError("runs_per_cell must be >= 1")
    grid = grid or GridSpec()
    eval_config = eval_config or EvalConfig(seed=base_config.seed)
    split_seed = base_config.seed if split_seed is None else split_seed
    cells = grid.cells()
    logger.info("grid search: %s cells x %s runs (backend=%s)", len(cells), runs_per_cell, backend)

    if backend == "celery":
        if data_dir is None:
            raise ConfigError("the celery backend loads the dataset from disk; pass data_dir")
        from zpgan.training.tasks import run_grid_cell

        pending = [
            run_grid_cell.delay({
                "data_dir": str(data_dir),
                "split_ratio": split_ratio,
                "split_seed": split_seed,
                "base_config": base_config.model_dump(mode="json"),
                "cell_index": i,
                "weights": w.model_dump(mode="json"),
                "runs_per_cell": runs_per_cell,
                "eval_config": eval_config.model_dump(mode="json"),
            })
            for i, w in enumerate(cells)
        ]
        results = [GridCellResult.model_validate(p.get()) for p in pending]
    elif backend == "local":
        train_set, test_set = split(dataset, split_ratio, split_seed)
        n_jobs = min(_resolve_jobs(jobs), len(cells))
        if n_jobs == 1:
            results = [
                run_cell(train_set, test_set, base_config, i, w, runs_per_cell, eval_config)
                for i, w in enumerate(cells)
            ]
        else:
            # spawn: torch thread pools do not survive fork
            ctx = multiprocessing.get_context("spawn")
            with ProcessPoolExecutor(max_workers=n_jobs, mp_context=ctx) as pool:
                futures = [
                    pool.submit(run_cell, train_set, test_set, base_config, i, w, runs_per_cell, eval_config)
                    for i, w in enumerate(cells)
                ]
                results = [f.result() for f in futures]
    else:
        raise ConfigError(f"unknown grid backend {backend!r}")

    return GridResults(runs_per_cell=runs_per_cell, seed=base_config.seed, cells=rank_cells(results))


def save_grid_results(results: GridResults, directory: PathLike) -> Path:
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    path = out / RESULTS_FILE
    path.write_text(results.model_dump_json(indent=2))
    return path
