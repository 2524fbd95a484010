# zpgan/tests/test_training.py
import json
import math

import numpy as np
import pytest
import torch

from zpgan.core.exceptions import CheckpointError, ShapeMismatchError, TrainingDivergedError
from zpgan.data.services import compute_stats, synth_dataset
from zpgan.losses.schemas import LossWeights
from zpgan.losses.services import weighted_total
from zpgan.nets.schemas import ArchitectureConfig
from zpgan.nets.services import init_params
from zpgan.training import services
from zpgan.training.checkpoint import load_checkpoint, save_checkpoint
from zpgan.training.schemas import CheckpointMeta, TrainConfig
from zpgan.training.services import LOG_FILE, Trainer, make_batch, train, train_step


@pytest.fixture
def batch_setup(small_dataset, quick_config):
    stats = compute_stats(small_dataset)
    batch = make_batch(small_dataset, np.arange(8), stats)
    params = init_params(quick_config.architecture, quick_config.seed)
    return params, batch, stats


def _generator_equal(a, b) -> bool:
    return all(torch.equal(x, y) for x, y in zip(a.generator.state_dict().values(), b.generator.state_dict().values()))


def test_batch_pairs_one_row_per_group(small_dataset):
    stats = compute_stats(small_dataset)
    batch = make_batch(small_dataset, [0, 1, 4, 5, 6, 9], stats)
    # samples 0-3 are group 0, 4-7 group 1, 8-11 group 2
    assert batch.group_ids == [0, 0, 1, 1, 1, 2]
    assert batch.pair_rows() == [0, 2, 5]
    assert batch.group_intensity[2].item() == pytest.approx(stats.per_group[1].intensity, rel=1e-6)


def test_train_step_changes_every_network(batch_setup, quick_config):
    params, batch, stats = batch_setup
    updated, log = train_step(params, batch, stats, quick_config)
    for name in ("generator", "discriminator", "regressor"):
        before = getattr(params, name).state_dict()
        after = getattr(updated, name).state_dict()
        assert any(not torch.equal(before[k], after[k]) for k in before), name
    assert math.isfinite(log.generator.total)


def test_train_step_leaves_input_untouched(batch_setup, quick_config):
    params, batch, stats = batch_setup
    snapshot = params.clone()
    train_step(params, batch, stats, quick_config)
    assert params.equal(snapshot)


def test_train_step_is_deterministic(batch_setup, quick_config):
    params, batch, stats = batch_setup
    a, log_a = train_step(params, batch, stats, quick_config)
    b, log_b = train_step(params, batch, stats, quick_config)
    assert a.equal(b)
    assert log_a == log_b


def _plain_cgan_step(params, batch, config):
    """Hand-written conditional GAN update: D on real/fake, then G through the updated D."""
    p = params.clone().train()
    betas = (config.adam_beta1, config.adam_beta2)
    opt_d = torch.optim.Adam(p.discriminator.parameters(), lr=config.learning_rate_d, betas=betas, eps=config.adam_eps)
    opt_g = torch.optim.Adam(p.generator.parameters(), lr=config.learning_rate_g, betas=betas, eps=config.adam_eps)
    rng = torch.Generator().manual_seed(config.seed + services.LATENT_SEED_OFFSET)
    c = batch.conditions
    z = torch.randn(len(batch), config.architecture.latent_dim, generator=rng, dtype=p.dtype)

    def clamp(d):
        return d.clamp(1e-7, 1.0 - 1e-7)

    fake = p.generator(c, z)
    opt_d.zero_grad()
    d_loss = -torch.log(clamp(p.discriminator(batch.responses, c))).mean() - torch.log(1.0 - clamp(p.discriminator(fake.detach(), c))).mean()
    d_loss.backward()
    opt_d.step()

    opt_g.zero_grad()
    for q in p.discriminator.parameters():
        q.requires_grad_(False)
    g_loss = -torch.log(clamp(p.discriminator(fake, c))).mean()
    g_loss.backward()
    opt_g.step()
    for q in p.discriminator.parameters():
        q.requires_grad_(True)
    return p


def _max_param_gap(a, b) -> float:
    return max((x - y).abs().max().item() for x, y in zip(a.parameters(), b.parameters()))


def test_zero_weights_give_a_plain_conditional_gan_step(batch_setup, quick_config):
    params, batch, stats = batch_setup
    config = quick_config.model_copy(update={"weights": LossWeights.plain_gan()})
    updated, log = train_step(params, batch, stats, config)
    with services.deterministic(config.strict_deterministic):
        reference = _plain_cgan_step(params, batch, config)

    assert _max_param_gap(updated.generator, reference.generator) <= 1e-7
    assert _max_param_gap(updated.discriminator, reference.discriminator) <= 1e-7
    assert not _generator_equal(updated, params)
    assert log.generator.div == 0.0


def test_nonzero_weights_change_the_update(batch_setup, quick_config, monkeypatch):
    params, batch, stats = batch_setup
    config = quick_config.model_copy(update={"weights": LossWeights(lambda_div=1.0, lambda_in=1e-2, lambda_aux=1e-2)})
    with_terms, _ = train_step(params, batch, stats, config)

    monkeypatch.setattr(services, "weighted_total", lambda adv, div, inten, aux, w: adv)
    adv_only, _ = train_step(params, batch, stats, config)
    assert not _generator_equal(with_terms, adv_only)


def test_each_optimizer_only_moves_its_own_network(batch_setup, quick_config):
    params, batch, stats = batch_setup
    trainer = Trainer(params.clone(), stats, quick_config)
    moved = {}

    def watch(name, optimizer):
        original = optimizer.step

        def step(*args, **kwargs):
            before = {n: t.clone() for n, t in trainer.params.named_tensors()}
            out = original(*args, **kwargs)
            moved[name] = {n.split(".")[0] for n, t in trainer.params.named_tensors() if not torch.equal(before[n], t)}
            return out

        optimizer.step = step

    watch("discriminator", trainer.opt_d)
    watch("regressor", trainer.opt_r)
    watch("generator", trainer.opt_g)
    trainer.step(batch)
    assert moved == {"discriminator": {"discriminator"}, "regressor": {"regressor"}, "generator": {"generator"}}


def test_logged_total_is_the_weighted_sum(small_dataset, quick_config):
    config = quick_config.model_copy(update={"epochs": 2, "weights": LossWeights(lambda_div=0.2, lambda_in=1e-3, lambda_aux=1e-2)})
    _, log = train(small_dataset, config)
    for s in log.steps:
        g = s.generator
        assert g.total == pytest.approx(weighted_total(g.adv, g.div, g.intensity, g.aux, config.weights), rel=1e-12)


def test_losses_stay_finite_on_two_groups(small_arch):

    dataset = synth_dataset(seed=11, n_groups=2, samples_per_group=4)
    config = TrainConfig(epochs=200, batch_size=8, seed=0, architecture=small_arch)
    _, log = train(dataset, config)
    assert len(log.steps) == 200
    assert all(math.isfinite(s.generator.total) for s in log.steps)
    assert all(math.isfinite(s.d_loss) and math.isfinite(s.r_loss) for s in log.steps)


def test_zero_epochs_returns_initial_params(small_dataset, quick_config):
    config = quick_config.model_copy(update={"epochs": 0})
    params, log = train(small_dataset, config)
    assert params.equal(init_params(config.architecture, config.seed))
    assert log.steps == []


def test_train_twice_gives_identical_logs(small_dataset, quick_config, tmp_path):
    config = quick_config.model_copy(update={"epochs": 2})
    p1, log1 = train(small_dataset, config, run_dir=tmp_path / "a")
    p2, log2 = train(small_dataset, config, run_dir=tmp_path / "b")
    assert log1.steps == log2.steps
    assert p1.equal(p2)
    assert (tmp_path / "a" / LOG_FILE).read_bytes() == (tmp_path / "b" / LOG_FILE).read_bytes()


def test_train_writes_log_and_periodic_checkpoints(small_dataset, quick_config, tmp_path):
    config = quick_config.model_copy(update={"epochs": 2, "checkpoint_every": 1})
    _, log = train(small_dataset, config, run_dir=tmp_path)
    lines = (tmp_path / LOG_FILE).read_text().splitlines()
    assert len(lines) == len(log.steps) == 6  # 24 samples / batch 8, two epochs
    assert json.loads(lines[0])["step"] == 0
    assert (tmp_path / "epoch_0001" / "params.bin").is_file()
    assert (tmp_path / "epoch_0002" / "meta.json").is_file()


def test_train_needs_two_groups(quick_config):
    with pytest.raises(ValueError):
        train(synth_dataset(seed=1, n_groups=1, samples_per_group=4), quick_config)


def test_divergence_is_reported_with_a_dump(small_dataset, quick_config, tmp_path, monkeypatch):
    monkeypatch.setattr(services, "adversarial_d_loss", lambda real, fake: torch.tensor(float("nan")))
    with pytest.raises(TrainingDivergedError) as info:
        train(small_dataset, quick_config, run_dir=tmp_path)
    err = info.value
    assert err.step == 0 and err.batch_index == 0
    dump = json.loads(open(err.dump_path).read())
    assert dump["failed"] == "discriminator loss"
    assert len(dump["sample_indices"]) == quick_config.batch_size


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------

def test_checkpoint_round_trip(small_dataset, quick_config, tmp_path):
    params, _ = train(small_dataset, quick_config)
    meta = CheckpointMeta(architecture=quick_config.architecture, seed=0, weights=quick_config.weights)
    save_checkpoint(params, meta, tmp_path / "ckpt")
    loaded, loaded_meta = load_checkpoint(tmp_path / "ckpt")
    assert loaded.equal(params)
    assert loaded_meta.weights == quick_config.weights
    assert loaded_meta.tensors[0].name.startswith("generator.")


def test_checkpoint_architecture_mismatch(quick_config, tmp_path):
    params = init_params(quick_config.architecture, 0)
    save_checkpoint(params, CheckpointMeta(architecture=quick_config.architecture, seed=0), tmp_path / "ckpt")
    with pytest.raises(ShapeMismatchError):
        load_checkpoint(tmp_path / "ckpt", architecture=ArchitectureConfig(latent_dim=4, base_channels=8, conditioning_embed_dim=4))


def test_checkpoint_truncated_payload(quick_config, tmp_path):
    params = init_params(quick_config.architecture, 0)
    path = save_checkpoint(params, CheckpointMeta(architecture=quick_config.architecture, seed=0), tmp_path / "ckpt")
    raw = (path / "params.bin").read_bytes()
    (path / "params.bin").write_bytes(raw[:-8])
    with pytest.raises(CheckpointError):
        load_checkpoint(path)
