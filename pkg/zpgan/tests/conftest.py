# zpgan/tests/conftest.py
from typing import List

import numpy as np
import pytest

from zpgan.data.schemas import COND_DIM, HEIGHT, WIDTH, Dataset
from zpgan.data.services import synth_dataset
from zpgan.nets.schemas import ArchitectureConfig
from zpgan.training.schemas import TrainConfig


def make_dataset(groups: List[List[np.ndarray]]) -> Dataset:
    """Hand-built dataset: one list of responses per group, conditions differ per group."""
    conditions, responses, group_ids, table = [], [], [], {}
    for gid, members in enumerate(groups):
        cond = np.zeros(COND_DIM, dtype=np.float32)
        cond[0] = 1.0 + gid
        table[gid] = list(range(len(responses), len(responses) + len(members)))
        for x in members:
            conditions.append(cond)
            responses.append(np.asarray(x, dtype=np.float32))
            group_ids.append(gid)
    return Dataset(
        conditions=np.stack(conditions),
        responses=np.stack(responses),
        group_ids=np.asarray(group_ids, dtype=np.int64),
        groups=table,
    )


def blank() -> np.ndarray:
    return np.zeros((HEIGHT, WIDTH), dtype=np.float32)


@pytest.fixture
def small_dataset() -> Dataset:
    return synth_dataset(seed=3, n_groups=6, samples_per_group=4)


@pytest.fixture
def small_arch() -> ArchitectureConfig:
    # full 56x30 images, few channels
    return ArchitectureConfig(latent_dim=4, base_channels=4, conditioning_embed_dim=4)


@pytest.fixture
def quick_config(small_arch) -> TrainConfig:
    return TrainConfig(epochs=1, batch_size=8, seed=0, architecture=small_arch)
