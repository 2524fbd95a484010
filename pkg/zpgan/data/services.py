# zpgan/data/services.py
import json
import logging
import math
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
from pydantic import ValidationError

from zpgan.core.exceptions import DatasetFormatError, ShapeMismatchError, SizeMismatchError
from zpgan.data.schemas import (
    COND_DIM,
    FORMAT_VERSION,
    HEIGHT,
    N_PIXELS,
    WIDTH,
    Dataset,
    DatasetManifest,
    DatasetStats,
    GroupStats,
    SynthProfile,
)
from zpgan.data.utils import find_max_pixel, intensity

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

MANIFEST_FILE = "manifest.json"
CONDITIONS_FILE = "conditions.bin"
RESPONSES_FILE = "responses.bin"
GROUPS_FILE = "groups.json"
STATS_FILE = "stats.json"

# charged pion, charged kaon, proton (GeV)
MASS_TABLE = (0.13957, 0.49368, 0.93827)
CHARGES = (-1.0, 0.0, 1.0)
CENTER_MARGIN = 2.0


# ---------------------------------------------------------------------------
# Synthetic generation
# ---------------------------------------------------------------------------

def _draw_condition(rng: np.random.Generator, profile: SynthProfile) -> np.ndarray:
    energy = rng.uniform(profile.energy_min, profile.energy_max)
    mass = MASS_TABLE[int(rng.integers(len(MASS_TABLE)))]
    charge = CHARGES[int(rng.integers(len(CHARGES)))]
    position = rng.uniform(-1.0, 1.0, size=3)
    momentum = rng.normal(0.0, 0.5, size=3)
    return np.array([energy, mass, charge, *position, *momentum], dtype=np.float32)


def _shower_center(cond: np.ndarray, profile: SynthProfile) -> Tuple[float, float]:
    """Affine map of the transverse position/momentum onto the grid, clipped to the interior."""
    k = (HEIGHT - 1) / 2.0 + profile.center_gain_k * (0.7 * cond[3] + 0.3 * cond[6])
    l = (WIDTH - 1) / 2.0 + profile.center_gain_l * (0.7 * cond[4] + 0.3 * cond[7])
    k = float(np.clip(k, CENTER_MARGIN, HEIGHT - 1 - CENTER_MARGIN))
    l = float(np.clip(l, CENTER_MARGIN, WIDTH - 1 - CENTER_MARGIN))
    return k, l


def _diversity_level(cond: np.ndarray) -> float:
    # smooth in the longitudinal position: groups near z=-1 barely fluctuate, near z=+1 strongly
    return float(0.5 * (1.0 + np.tanh(2.5 * cond[5])))


def synth_dataset(
    seed: int,
    n_groups: int,
    samples_per_group: int,
    profile: Optional[SynthProfile] = None,
) -> Dataset:
    """Deterministic ZP-like dataset: Gaussian showers whose center, intensity and
    fluctuation level are smooth functions of the conditioning vector."""
    if n_groups < 1:
        raise ValueError("n_groups must be >= 1")
    if samples_per_group < 2:
        raise ValueError("samples_per_group must be >= 2 so per-group variance is defined")
    profile = profile or SynthProfile()

    rng = np.random.default_rng(seed)
    n = n_groups * samples_per_group
    conditions = np.empty((n, COND_DIM), dtype=np.float32)
    responses = np.empty((n, HEIGHT, WIDTH), dtype=np.float32)
    group_ids = np.empty(n, dtype=np.int64)
    groups: Dict[int, List[int]] = {}

    kk, ll = np.meshgrid(np.arange(HEIGHT, dtype=np.float64), np.arange(WIDTH, dtype=np.float64), indexing="ij")
    seen = set()

    for g in range(n_groups):
        cond = _draw_condition(rng, profile)
        while cond.tobytes() in seen:
            cond = _draw_condition(rng, profile)
        seen.add(cond.tobytes())

        c64 = cond.astype(np.float64)
        center_k, center_l = _shower_center(c64, profile)
        base = profile.intensity_scale * c64[0]
        level = _diversity_level(c64)
        jitter = profile.jitter_scale * level
        noise = profile.intensity_noise * level

        members = []
        for s in range(samples_per_group):
            i = g * samples_per_group + s
            ck = float(np.clip(center_k + jitter * rng.standard_normal(), 0.0, HEIGHT - 1.0))
            cl = float(np.clip(center_l + jitter * rng.standard_normal(), 0.0, WIDTH - 1.0))
            amplitude = base * math.exp(noise * rng.standard_normal() - 0.5 * noise * noise)
            blob = np.exp(
                -((kk - ck) ** 2) / (2.0 * profile.blob_sigma_k ** 2)
                - ((ll - cl) ** 2) / (2.0 * profile.blob_sigma_l ** 2)
            )
            responses[i] = (amplitude * blob / blob.sum()).astype(np.float32)
            conditions[i] = cond
            group_ids[i] = g
            members.append(i)
        groups[g] = members

    logger.debug("synthesized %s groups x %s samples (seed=%s)", n_groups, samples_per_group, seed)
    return Dataset(
        conditions=conditions,
        responses=responses,
        group_ids=group_ids,
        groups=groups,
        seed=seed,
        profile=profile,
    )


def split(dataset: Dataset, ratio: float, seed: int) -> Tuple[Dataset, Dataset]:
    """Group-level train/test split; ceil(ratio * n_groups) groups go to the first half."""
    if not 0.0 < ratio < 1.0:
        raise ValueError(f"split ratio must lie in (0, 1), got {ratio}")
    if len(dataset) == 0:
        raise ValueError("cannot split an empty dataset")

    gids = sorted(dataset.groups)
    perm = np.random.default_rng(seed).permutation(len(gids))
    # round() absorbs products like 0.7 * 10 = 7.000000000000001
    n_train = math.ceil(round(ratio * len(gids), 9))
    train_ids = sorted(gids[int(i)] for i in perm[:n_train])
    test_ids = sorted(gids[int(i)] for i in perm[n_train:])
    return dataset.subset(train_ids), dataset.subset(test_ids)


# ---------------------------------------------------------------------------
# Preprocessing statistics
# ---------------------------------------------------------------------------

def _pixel_std_sum(x: np.ndarray) -> float:
    # shift by the first member so identical groups give exactly zero
    d = x - x[0]
    mean = d.mean(axis=0)
    var = ((d - mean) ** 2).sum(axis=0) / x.shape[0]
    return float(np.sqrt(var).sum())


def compute_stats(dataset: Dataset) -> DatasetStats:
    if len(dataset) == 0:
        raise ValueError("cannot compute statistics of an empty dataset")

    normalization = float(len(dataset))
    per_group: Dict[int, GroupStats] = {}
    for gid in sorted(dataset.groups):
        members = sorted(dataset.groups[gid])
        if not members:
            raise ValueError(f"group {gid} has no samples")
        raw = 0.0
        if len(members) >= 2:
            raw = _pixel_std_sum(dataset.responses[members].astype(np.float64))
        ref = members[0]
        per_group[gid] = GroupStats(
            diversity_weight_raw=raw,
            diversity_weight=min(1.0, raw / normalization),
            intensity=intensity(dataset.responses[ref]),
            center=find_max_pixel(dataset.responses[ref]),
            reference_index=ref,
        )
    return DatasetStats(per_group=per_group, normalization_constant=normalization)


def save_stats(stats: DatasetStats, path: PathLike) -> Path:
    path = Path(path)
    if path.is_dir():
        path = path / STATS_FILE
    path.write_text(stats.model_dump_json(indent=2))
    return path


def load_stats(path: PathLike) -> DatasetStats:
    path = Path(path)
    if path.is_dir():
        path = path / STATS_FILE
    return DatasetStats.model_validate_json(path.read_text())


# ---------------------------------------------------------------------------
# On-disk format
# ---------------------------------------------------------------------------

def save_dataset(dataset: Dataset, directory: PathLike) -> Path:
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)

    manifest = DatasetManifest(
        n_samples=len(dataset),
        n_groups=dataset.n_groups,
        seed=dataset.seed,
        profile=dataset.profile,
    )
    (out / MANIFEST_FILE).write_text(manifest.model_dump_json(indent=2))
    (out / CONDITIONS_FILE).write_bytes(np.ascontiguousarray(dataset.conditions, dtype="<f4").tobytes())
    (out / RESPONSES_FILE).write_bytes(np.ascontiguousarray(dataset.responses, dtype="<f4").tobytes())
    groups = {str(gid): [int(i) for i in members] for gid, members in sorted(dataset.groups.items())}
    (out / GROUPS_FILE).write_text(json.dumps(groups))

    logger.info("saved dataset: %s samples, %s groups -> %s", len(dataset), dataset.n_groups, out)
    return out


def _read_payload(path: Path, rows: int, cols: int) -> np.ndarray:
    raw = path.read_bytes()
    expected = rows * cols * 4
    if len(raw) != expected:
        raise SizeMismatchError(f"{path.name}: expected {expected} bytes, found {len(raw)}")
    arr = np.frombuffer(raw, dtype="<f4").astype(np.float32).reshape(rows, cols)
    if not np.all(np.isfinite(arr)):
        raise DatasetFormatError(f"{path.name}: non-finite values")
    return arr


def load_dataset(directory: PathLike) -> Dataset:
    src = Path(directory)
    try:
        manifest = DatasetManifest.model_validate_json((src / MANIFEST_FILE).read_text())
    except ValidationError as exc:
        raise DatasetFormatError(f"malformed manifest: {exc}") from exc

    if manifest.version != FORMAT_VERSION:
        raise DatasetFormatError(f"unsupported dataset version {manifest.version}")
    if (manifest.height, manifest.width, manifest.cond_dim) != (HEIGHT, WIDTH, COND_DIM):
        raise ShapeMismatchError(
            f"manifest shape {manifest.height}x{manifest.width} (cond_dim={manifest.cond_dim}), "
            f"expected {HEIGHT}x{WIDTH} (cond_dim={COND_DIM})"
        )
    if manifest.dtype != "f32le":
        raise DatasetFormatError(f"unsupported dtype {manifest.dtype!r}")

    n = manifest.n_samples
    conditions = _read_payload(src / CONDITIONS_FILE, n, COND_DIM)
    responses = _read_payload(src / RESPONSES_FILE, n, N_PIXELS).reshape(n, HEIGHT, WIDTH)
    if np.any(responses < 0):
        raise DatasetFormatError("responses contain negative pixels")

    try:
        groups = {int(k): [int(i) for i in v] for k, v in json.loads((src / GROUPS_FILE).read_text()).items()}
    except (ValueError, AttributeError, TypeError) as exc:
        raise DatasetFormatError(f"malformed {GROUPS_FILE}: {exc}") from exc
    if len(groups) != manifest.n_groups:
        raise SizeMismatchError(f"manifest lists {manifest.n_groups} groups, {GROUPS_FILE} has {len(groups)}")

    group_ids = np.full(n, -1, dtype=np.int64)
    for gid, members in groups.items():
        for i in members:
            if not 0 <= i < n:
                raise DatasetFormatError(f"group {gid} references sample {i} outside [0, {n})")
            group_ids[i] = gid

    try:
        return Dataset(
            conditions=conditions,
            responses=responses,
            group_ids=group_ids,
            groups=groups,
            seed=manifest.seed,
            profile=manifest.profile,
        )
    except ValidationError as exc:
        raise DatasetFormatError(str(exc)) from exc
