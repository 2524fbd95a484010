# zpgan/training/services.py
import json
import logging
import time
from contextlib import contextmanager
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, List, Optional, Tuple, Union

import numpy as np
import torch
import torch.nn as nn

from zpgan.core.exceptions import NonFiniteLossError, TrainingDivergedError
from zpgan.data.schemas import Dataset, DatasetStats
from zpgan.data.services import compute_stats
from zpgan.data.utils import find_max_pixels
from zpgan.losses.services import (
    adversarial_d_loss,
    adversarial_g_loss,
    aux_loss,
    diversity_loss,
    intensity_loss_to_target,
    total_generator_loss,
    weighted_total,
)
from zpgan.nets.services import ModelParams, init_params
from zpgan.training.checkpoint import save_checkpoint
from zpgan.training.schemas import CheckpointMeta, StepLog, TrainConfig, TrainLog

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]
LOG_FILE = "train_log.jsonl"

# latents come from their own stream so reshuffling never changes them
LATENT_SEED_OFFSET = 1


@dataclass
class Batch:
    index: int
    sample_indices: np.ndarray
    conditions: torch.Tensor
    responses: torch.Tensor
    group_ids: List[int]
    real_centers: torch.Tensor
    group_centers: torch.Tensor
    group_intensity: torch.Tensor
    diversity_weight: torch.Tensor

    def __len__(self) -> int:
        return len(self.group_ids)

    def pair_rows(self) -> List[int]:
        """First row of every distinct group, in batch order: one diversity pair per condition."""
        seen, rows = set(), []
        for i, gid in enumerate(self.group_ids):
            if gid not in seen:
                seen.add(gid)
                rows.append(i)
        return rows


def make_batch(
    dataset: Dataset,
    indices,
    stats: DatasetStats,
    dtype: torch.dtype = torch.float32,
    index: int = 0,
    real_centers: Optional[np.ndarray] = None,
) -> Batch:
    idx = np.asarray(indices, dtype=np.int64)
    group_ids = [int(g) for g in dataset.group_ids[idx]]
    missing = [g for g in set(group_ids) if g not in stats.per_group]
    if missing:
        raise ValueError(f"statistics do not cover groups {sorted(missing)}")
    centers = real_centers[idx] if real_centers is not None else find_max_pixels(dataset.responses[idx])
    per = [stats.per_group[g] for g in group_ids]
    return Batch(
        index=index,
        sample_indices=idx,
        conditions=torch.as_tensor(dataset.conditions[idx], dtype=dtype),
        responses=torch.as_tensor(dataset.responses[idx], dtype=dtype),
        group_ids=group_ids,
        real_centers=torch.as_tensor(centers, dtype=dtype),
        group_centers=torch.tensor([s.center for s in per], dtype=dtype),
        group_intensity=torch.tensor([s.intensity for s in per], dtype=dtype),
        diversity_weight=torch.tensor([s.diversity_weight for s in per], dtype=dtype),
    )


@contextmanager
def _frozen(*modules: nn.Module) -> Iterator[None]:
    saved = [(p, p.requires_grad) for m in modules for p in m.parameters()]
    for p, _ in saved:
        p.requires_grad_(False)
    try:
        yield
    finally:
        for p, flag in saved:
            p.requires_grad_(flag)


@contextmanager
def deterministic(enabled: bool) -> Iterator[None]:
    """Single-threaded, deterministic kernels for the duration of the block."""
    if not enabled:
        yield
        return
    threads = torch.get_num_threads()
    previous = torch.are_deterministic_algorithms_enabled()
    torch.set_num_threads(1)
    torch.use_deterministic_algorithms(True)
    try:
        yield
    finally:
        torch.use_deterministic_algorithms(previous)
        torch.set_num_threads(threads)


def _optimizer(config: TrainConfig, parameters, lr: float) -> torch.optim.Optimizer:
    if config.optimizer == "sgd":
        return torch.optim.SGD(parameters, lr=lr)
    return torch.optim.Adam(parameters, lr=lr, betas=(config.adam_beta1, config.adam_beta2), eps=config.adam_eps)


class Trainer:
    """Owns the optimizers and latent RNG of one run; step() is the D -> R -> G update."""

    def __init__(self, params: ModelParams, stats: DatasetStats, config: TrainConfig, dump_dir: Optional[PathLike] = None):
        self.params = params
        self.stats = stats
        self.config = config
        self.dump_dir = Path(dump_dir) if dump_dir else None
        self.step_count = 0
        self.rng = torch.Generator().manual_seed(int(config.seed) + LATENT_SEED_OFFSET)
        self.opt_g = _optimizer(config, params.generator.parameters(), config.learning_rate_g)
        self.opt_d = _optimizer(config, params.discriminator.parameters(), config.learning_rate_d)
        self.opt_r = _optimizer(config, params.regressor.parameters(), config.learning_rate_r)
        params.train()

    def _diverged(self, batch: Batch, epoch: int, what: str, terms: dict) -> TrainingDivergedError:
        dump_path = None
        if self.dump_dir is not None:
            self.dump_dir.mkdir(parents=True, exist_ok=True)
            dump = self.dump_dir / f"divergence_step{self.step_count}.json"
            dump.write_text(json.dumps({
                "step": self.step_count,
                "epoch": epoch,
                "batch_index": batch.index,
                "failed": what,
                "terms": {k: float(v.detach()) for k, v in terms.items()},
                "sample_indices": [int(i) for i in batch.sample_indices],
                "conditions": batch.conditions.tolist(),
            }, indent=2))
            dump_path = str(dump)
        logger.error("non-finite %s at step %s (batch %s); dump: %s", what, self.step_count, batch.index, dump_path)
        return TrainingDivergedError(
            f"non-finite {what} at step {self.step_count}, batch {batch.index}",
            step=self.step_count, batch_index=batch.index, dump_path=dump_path,
        )

    def step(self, batch: Batch, epoch: int = 0) -> StepLog:
        p, cfg = self.params, self.config
        dtype = p.dtype
        n = len(batch)
        c = batch.conditions
        rows = batch.pair_rows()

        z = torch.randn(n, p.config.latent_dim, generator=self.rng, dtype=dtype)
        use_pairs = cfg.weights.lambda_div > 0
        if use_pairs:
            z_pair = torch.randn(len(rows), p.config.latent_dim, generator=self.rng, dtype=dtype)
            # one forward so batch norm sees the pairs with the rest of the batch
            fake_all = p.generator(torch.cat([c, c[rows]]), torch.cat([z, z_pair]))
            fake, fake_pair = fake_all[:n], fake_all[n:]
        else:
            # with the diversity term off the step is a plain conditional GAN step
            fake = p.generator(c, z)

        # (1) discriminator
        self.opt_d.zero_grad(set_to_none=True)
        d_loss = adversarial_d_loss(p.discriminator(batch.responses, c), p.discriminator(fake.detach(), c))
        if not torch.isfinite(d_loss):
            raise self._diverged(batch, epoch, "discriminator loss", {"d_loss": d_loss})
        d_loss.backward()
        self.opt_d.step()

        # (2) regressor, supervised on real showers only
        self.opt_r.zero_grad(set_to_none=True)
        r_loss = aux_loss(p.regressor(batch.responses), batch.real_centers)
        if not torch.isfinite(r_loss):
            raise self._diverged(batch, epoch, "regressor loss", {"r_loss": r_loss})
        r_loss.backward()
        self.opt_r.step()

        # (3) generator against the freshly updated critics, held fixed
        self.opt_g.zero_grad(set_to_none=True)
        with _frozen(p.discriminator, p.regressor):
            adv = adversarial_g_loss(p.discriminator(fake, c), saturating=cfg.saturating_g_loss)
            if use_pairs:
                div = diversity_loss(batch.diversity_weight[rows], fake[rows], fake_pair, z[rows], z_pair, eps=cfg.diversity_eps)
            else:
                div = fake.new_zeros(())
            inten = intensity_loss_to_target(batch.group_intensity, fake)
            aux = aux_loss(p.regressor(fake), batch.group_centers)
            terms = {"adv": adv, "div": div, "intensity": inten, "aux": aux}
            try:
                breakdown = total_generator_loss(adv, div, inten, aux, cfg.weights)
            except NonFiniteLossError:
                raise self._diverged(batch, epoch, "generator loss", terms)
            weighted_total(adv, div, inten, aux, cfg.weights).backward()
        self.opt_g.step()

        log = StepLog(
            step=self.step_count,
            epoch=epoch,
            batch_index=batch.index,
            generator=breakdown,
            d_loss=float(d_loss.detach()),
            r_loss=float(r_loss.detach()),
        )
        self.step_count += 1
        return log


def train_step(params: ModelParams, batch: Batch, stats: DatasetStats, config: TrainConfig) -> Tuple[ModelParams, StepLog]:
    """One D -> R -> G update on a copy of `params`, with fresh optimizer state."""
    with deterministic(config.strict_deterministic):
        trainer = Trainer(params.clone(), stats, config)
        log = trainer.step(batch)
    return trainer.params, log


def _meta(config: TrainConfig, step: int, epoch: int, **extra) -> CheckpointMeta:
    return CheckpointMeta(
        architecture=config.architecture,
        seed=config.seed,
        step=step,
        epoch=epoch,
        weights=config.weights,
        train_config=config,
        **extra,
    )


def train(
    dataset: Dataset,
    config: TrainConfig,
    run_dir: Optional[PathLike] = None,
    meta_extra: Optional[dict] = None,
) -> Tuple[ModelParams, TrainLog]:
    """Full training loop.

    With run_dir set, writes train_log.jsonl, periodic checkpoints
    (epoch_NNNN/ every checkpoint_every epochs) and divergence dumps there.
    """
    if dataset.n_groups < 2:
        raise ValueError("training needs at least two condition groups")

    params = init_params(config.architecture, config.seed)
    log = TrainLog()
    if config.epochs == 0:
        return params, log

    run_path = Path(run_dir) if run_dir else None
    if run_path is not None:
        run_path.mkdir(parents=True, exist_ok=True)
    log_fh = (run_path / LOG_FILE).open("w") if run_path is not None else None

    stats = compute_stats(dataset)
    real_centers = find_max_pixels(dataset.responses)
    shuffle = np.random.default_rng(config.seed)
    n = len(dataset)

    try:
        with deterministic(config.strict_deterministic):
            trainer = Trainer(params, stats, config, dump_dir=run_path)
            for epoch in range(config.epochs):
                started = time.perf_counter()
                order = shuffle.permutation(n)
                epoch_logs: List[StepLog] = []
                for b, start in enumerate(range(0, n, config.batch_size)):
                    idx = order[start:start + config.batch_size]
                    if len(idx) < 2:
                        continue
                    batch = make_batch(dataset, idx, stats, dtype=params.dtype, index=b, real_centers=real_centers)
                    step_log = trainer.step(batch, epoch)
                    epoch_logs.append(step_log)
                    if log_fh is not None:
                        log_fh.write(step_log.model_dump_json() + "\n")
                    logger.debug("step %s: G %.5g D %.5g R %.5g", step_log.step, step_log.generator.total, step_log.d_loss, step_log.r_loss)

                seconds = time.perf_counter() - started
                log.steps.extend(epoch_logs)
                log.epoch_seconds.append(seconds)
                if epoch_logs:
                    logger.info(
                        "epoch %s/%s: G %.5g D %.5g R %.5g (%.1fs)",
                        epoch + 1, config.epochs,
                        np.mean([s.generator.total for s in epoch_logs]),
                        np.mean([s.d_loss for s in epoch_logs]),
                        np.mean([s.r_loss for s in epoch_logs]),
                        seconds,
                    )
                if run_path is not None and config.checkpoint_every and (epoch + 1) % config.checkpoint_every == 0:
                    save_checkpoint(params, _meta(config, trainer.step_count, epoch + 1, **(meta_extra or {})), run_path / f"epoch_{epoch + 1:04d}")
    finally:
        if log_fh is not None:
            log_fh.close()

    return params, log
