# zpgan/training/ablation.py
"""Desk-scale reproduction of the four-model comparison (GAN, SDI-GAN, +intensity, +aux)."""
import logging
from pathlib import Path
from typing import List, Optional, Union

import numpy as np

from zpgan.data.schemas import Dataset
from zpgan.evaluation.schemas import EvalConfig
from zpgan.evaluation.services import evaluate_model
from zpgan.losses.schemas import LossWeights
from zpgan.training.schemas import AblationRow, AblationRun, AblationTable, AblationVariant, TrainConfig
from zpgan.training.services import train

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]
RESULTS_FILE = "ablation_results.json"

# The synthetic showers carry pixel sums in the hundreds, not the detector's
# scale, so the intensity strength is raised to keep its gradient comparable.
SYNTHETIC_BENCHMARK_WEIGHTS = LossWeights(lambda_div=1e-1, lambda_in=1e-3, lambda_aux=1e-3)


def default_variants(weights: Optional[LossWeights] = None) -> List[AblationVariant]:
    w = weights or SYNTHETIC_BENCHMARK_WEIGHTS
    return [
        AblationVariant(name="gan", weights=LossWeights.plain_gan()),
        AblationVariant(name="sdi", weights=LossWeights(lambda_div=w.lambda_div, lambda_in=0.0, lambda_aux=0.0)),
        AblationVariant(name="sdi_intensity", weights=LossWeights(lambda_div=w.lambda_div, lambda_in=w.lambda_in, lambda_aux=0.0)),
        AblationVariant(name="full", weights=w),
    ]


def run_ablation(
    train_set: Dataset,
    test_set: Dataset,
    base_config: TrainConfig,
    variants: Optional[List[AblationVariant]] = None,
    runs: int = 5,
    eval_config: Optional[EvalConfig] = None,
) -> AblationTable:
    """Train every variant on the same seeds (base seed + run) and score it on the test split."""
    if runs < 1:
        raise ValueError("runs must be >= 1")
    variants = variants or default_variants()
    eval_config = eval_config or EvalConfig(seed=base_config.seed)

    rows = []
    for variant in variants:
        results = []
        for run in range(runs):
            seed = base_config.seed + run
            config = base_config.model_copy(update={"weights": variant.weights, "seed": seed})
            params, _ = train(train_set, config)
            report = evaluate_model(
                params,
                test_set,
                eval_config.samples_per_condition,
                seed=seed,
                n_bins=eval_config.n_bins,
                geometry=eval_config.geometry,
            )
            results.append(AblationRun(
                seed=seed,
                mean_ws=report.mean_ws,
                intensity_gap=report.intensity_gap,
                center_error_mean=report.center_error_mean,
            ))
        ws = np.array([r.mean_ws for r in results])
        row = AblationRow(
            name=variant.name,
            weights=variant.weights,
            runs=results,
            mean_ws=float(ws.mean()),
            median_ws=float(np.median(ws)),
            std_ws=float(ws.std()),
            median_intensity_gap=float(np.median([r.intensity_gap for r in results])),
            median_center_error=float(np.median([r.center_error_mean for r in results])),
        )
        logger.info("%s: mean WS %.6g +- %.3g over %s runs", row.name, row.mean_ws, row.std_ws, runs)
        rows.append(row)
    return AblationTable(rows=rows)


def save_ablation(table: AblationTable, directory: PathLike) -> Path:
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    path = out / RESULTS_FILE
    path.write_text(table.model_dump_json(indent=2))
    return path
