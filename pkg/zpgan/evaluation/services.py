# zpgan/evaluation/services.py
import csv
import logging
from pathlib import Path
from typing import List, Optional, Sequence, Union

import numpy as np
import torch
from scipy.stats import wasserstein_distance

from zpgan.data.schemas import Dataset, DatasetStats
from zpgan.data.services import compute_stats
from zpgan.data.utils import find_max_pixels, validate_response
from zpgan.evaluation.schemas import (
    DEFAULT_BINS,
    N_CHANNELS,
    ChannelGeometry,
    ChannelHistogram,
    ChannelValues,
    EvalReport,
)
from zpgan.nets.services import ModelParams, generator_forward

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]
REPORT_FILE = "report.json"
HIST_HEADER = ["bin_lo", "bin_hi", "count_true", "count_gen"]

_DEFAULT_GEOMETRY = ChannelGeometry()


def channel_matrix(responses: np.ndarray, geometry: Optional[ChannelGeometry] = None) -> np.ndarray:
    """(n, H, W) responses -> (n, 5) channel sums in float64."""
    geometry = geometry or _DEFAULT_GEOMETRY
    x = np.asarray(responses, dtype=np.float64)
    cols = [x[:, r0:r1, c0:c1].sum(axis=(1, 2)) for r0, r1, c0, c1 in geometry.regions]
    cols.append(x.sum(axis=(1, 2)))
    return np.stack(cols, axis=1)


def extract_channels(x, geometry: Optional[ChannelGeometry] = None) -> ChannelValues:
    arr = validate_response(x)
    values = channel_matrix(arr[None], geometry)[0]
    return ChannelValues(**{f"ch{i + 1}": float(v) for i, v in enumerate(values)})


def ws1(a: Sequence[float], b: Sequence[float]) -> float:
    """Empirical 1-D Wasserstein-1 distance (area between the two empirical CDFs)."""
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.size == 0 or b.size == 0:
        raise ValueError("ws1 needs two non-empty samples")
    return float(wasserstein_distance(a, b))


def _column(values, channel: int) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[:, channel - 1]
    return arr.ravel()


def channel_histograms(true_values, generated_values, channel: int, n_bins: int = DEFAULT_BINS) -> ChannelHistogram:
    """Counts of both sets over shared uniform bins spanning the union of the samples.

    Accepts (n, 5) channel matrices or 1-D value arrays. If every value is equal
    there is a single bin [v, v].
    """
    if not 1 <= channel <= N_CHANNELS:
        raise ValueError(f"channel must be in 1..{N_CHANNELS}")
    if n_bins < 2:
        raise ValueError("n_bins must be >= 2")
    t, g = _column(true_values, channel), _column(generated_values, channel)
    if t.size == 0 or g.size == 0:
        raise ValueError("histogram inputs must be non-empty")

    lo = float(min(t.min(), g.min()))
    hi = float(max(t.max(), g.max()))
    if lo == hi:
        return ChannelHistogram(channel=channel, edges=[lo, hi], counts_true=[int(t.size)], counts_gen=[int(g.size)])

    edges = np.linspace(lo, hi, n_bins + 1)
    counts_true, _ = np.histogram(t, bins=edges)
    counts_gen, _ = np.histogram(g, bins=edges)
    return ChannelHistogram(
        channel=channel,
        edges=[float(e) for e in edges],
        counts_true=[int(c) for c in counts_true],
        counts_gen=[int(c) for c in counts_gen],
    )


def compare_responses(
    true_responses: np.ndarray,
    generated_responses: np.ndarray,
    generated_targets: np.ndarray,
    seed: Optional[int] = None,
    n_bins: int = DEFAULT_BINS,
    geometry: Optional[ChannelGeometry] = None,
) -> EvalReport:
    """Pooled channel WS-1, center error and intensity gap between two response sets.

    generated_targets holds, per generated response, the stored (k, l) center of its group.
    """
    true_ch = channel_matrix(true_responses, geometry)
    gen_ch = channel_matrix(generated_responses, geometry)
    per_channel = [ws1(true_ch[:, i], gen_ch[:, i]) for i in range(N_CHANNELS)]

    centers = find_max_pixels(np.asarray(generated_responses))
    center_error = float(np.linalg.norm(centers - np.asarray(generated_targets, dtype=np.float64), axis=1).mean())
    intensity_gap = abs(float(true_ch[:, -1].mean()) - float(gen_ch[:, -1].mean()))

    return EvalReport(
        per_channel_ws=per_channel,
        mean_ws=float(np.mean(per_channel)),
        center_error_mean=center_error,
        intensity_gap=intensity_gap,
        histograms=[channel_histograms(true_ch, gen_ch, ch, n_bins) for ch in range(1, N_CHANNELS + 1)],
        n_samples=int(gen_ch.shape[0]),
        n_true=int(true_ch.shape[0]),
        seed=seed,
    )


@torch.no_grad()
def generate_for_groups(params: ModelParams, dataset: Dataset, samples_per_condition: int, seed: int) -> np.ndarray:
    """samples_per_condition generations per group (ascending group id) -> (groups * spc, H, W)."""
    gen = torch.Generator().manual_seed(int(seed))
    out: List[np.ndarray] = []
    for gid in sorted(dataset.groups):
        c = np.repeat(dataset.conditions[dataset.groups[gid][0]][None], samples_per_condition, axis=0)
        z = torch.randn(samples_per_condition, params.config.latent_dim, generator=gen, dtype=params.dtype)
        out.append(generator_forward(params, c, z).double().numpy())
    return np.concatenate(out, axis=0)


def evaluate_model(
    params: ModelParams,
    test_dataset: Dataset,
    samples_per_condition: int,
    seed: int,
    n_bins: int = DEFAULT_BINS,
    geometry: Optional[ChannelGeometry] = None,
    stats: Optional[DatasetStats] = None,
) -> EvalReport:
    if len(test_dataset) == 0:
        raise ValueError("test dataset is empty")
    if samples_per_condition < 1:
        raise ValueError("samples_per_condition must be >= 1")
    stats = stats or compute_stats(test_dataset)

    generated = generate_for_groups(params, test_dataset, samples_per_condition, seed)
    targets = np.repeat(
        np.array([stats.per_group[gid].center for gid in sorted(test_dataset.groups)], dtype=np.float64),
        samples_per_condition,
        axis=0,
    )
    report = compare_responses(test_dataset.responses, generated, targets, seed=seed, n_bins=n_bins, geometry=geometry)
    logger.info(
        "evaluated %s groups x %s samples: mean WS %.6g, center error %.4g px",
        test_dataset.n_groups, samples_per_condition, report.mean_ws, report.center_error_mean,
    )
    return report


# ---------------------------------------------------------------------------
# Report files
# ---------------------------------------------------------------------------

def write_histogram_csv(hist: ChannelHistogram, path: PathLike) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(HIST_HEADER)
        for i in range(hist.n_bins):
            writer.writerow([f"{hist.edges[i]:.17g}", f"{hist.edges[i + 1]:.17g}", hist.counts_true[i], hist.counts_gen[i]])
    return path


def write_report(report: EvalReport, directory: PathLike, channels: Optional[Sequence[int]] = None) -> Path:
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    (out / REPORT_FILE).write_text(report.model_dump_json(indent=2))
    wanted = set(channels) if channels else set(range(1, N_CHANNELS + 1))
    for hist in report.histograms:
        if hist.channel in wanted:
            write_histogram_csv(hist, out / f"hist_ch{hist.channel}.csv")
    return out


def read_report(directory: PathLike) -> EvalReport:
    path = Path(directory)
    if path.is_dir():
        path = path / REPORT_FILE
    return EvalReport.model_validate_json(path.read_text())
