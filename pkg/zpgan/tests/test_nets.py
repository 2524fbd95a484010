# zpgan/tests/test_nets.py
import pytest
import torch
import torch.nn as nn

from zpgan.core.exceptions import ShapeMismatchError
from zpgan.losses.schemas import LossWeights
from zpgan.losses.services import (
    adversarial_d_loss,
    adversarial_g_loss,
    aux_loss,
    diversity_loss,
    intensity_loss_to_target,
    weighted_total,
)
from zpgan.nets.schemas import ArchitectureConfig
from zpgan.nets.services import (
    discriminator_forward,
    generator_forward,
    grad_check,
    init_params,
    regressor_forward,
)


def _inputs(cfg, n=3, seed=0):
    gen = torch.Generator().manual_seed(seed)
    c = torch.rand(n, cfg.cond_dim, generator=gen)
    z = torch.randn(n, cfg.latent_dim, generator=gen)
    return c, z


# ---------------------------------------------------------------------------
# Forward passes
# ---------------------------------------------------------------------------

def test_generator_shape_and_nonnegative(small_arch):
    params = init_params(small_arch, seed=0)
    c, z = _inputs(small_arch)
    x = generator_forward(params, c, z)
    assert x.shape == (3, 56, 30)
    assert float(x.min()) >= 0.0

    single = generator_forward(params, c[0], z[0])
    assert single.shape == (56, 30)


def test_generator_is_pure(small_arch):
    params = init_params(small_arch, seed=0)
    c, z = _inputs(small_arch)
    assert torch.equal(generator_forward(params, c, z), generator_forward(params, c, z))


def test_generator_depends_on_latent(small_arch):
    params = init_params(small_arch, seed=0)
    c, z = _inputs(small_arch, n=2)
    same_c = c[:1].repeat(2, 1)
    x = generator_forward(params, same_c, z)
    assert not torch.equal(x[0], x[1])


def test_relu_output_activation_is_nonnegative():
    cfg = ArchitectureConfig(latent_dim=4, base_channels=4, conditioning_embed_dim=4, output_activation="relu")
    params = init_params(cfg, seed=1)
    c, z = _inputs(cfg)
    assert float(generator_forward(params, c, z).min()) >= 0.0


def test_discriminator_range_and_purity(small_arch):
    params = init_params(small_arch, seed=0)
    c, z = _inputs(small_arch)
    x = generator_forward(params, c, z).detach()
    d = discriminator_forward(params, x, c)
    assert d.shape == (3,)
    assert bool(((d > 0) & (d < 1)).all())
    assert torch.equal(d, discriminator_forward(params, x.clone(), c))


def test_regressor_output_inside_grid(small_arch):
    params = init_params(small_arch, seed=0)
    x = torch.rand(4, 56, 30)
    out = regressor_forward(params, x)
    assert out.shape == (4, 2)
    assert bool((out[:, 0] >= 0).all() and (out[:, 0] <= 56).all())
    assert bool((out[:, 1] >= 0).all() and (out[:, 1] <= 30).all())
    assert torch.equal(out, regressor_forward(params, x.clone()))


def test_forward_shape_errors(small_arch):
    params = init_params(small_arch, seed=0)
    with pytest.raises(ShapeMismatchError):
        regressor_forward(params, torch.rand(30, 56))
    with pytest.raises(ShapeMismatchError):
        generator_forward(params, torch.rand(2, 8), torch.randn(2, small_arch.latent_dim))
    with pytest.raises(ShapeMismatchError):
        generator_forward(params, torch.rand(2, 9), torch.randn(3, small_arch.latent_dim))


def test_architecture_must_cover_image():
    with pytest.raises(ValueError):
        ArchitectureConfig(seed_height=6)


# ---------------------------------------------------------------------------
# init_params
# ---------------------------------------------------------------------------

def test_init_same_seed_is_identical(small_arch):
    assert init_params(small_arch, 4).equal(init_params(small_arch, 4))


def test_init_different_seeds_differ(small_arch):
    assert not init_params(small_arch, 4).equal(init_params(small_arch, 5))


def test_init_does_not_touch_global_rng(small_arch):
    torch.manual_seed(123)
    expected = torch.rand(3)
    torch.manual_seed(123)
    init_params(small_arch, 0)
    assert torch.equal(torch.rand(3), expected)


def test_init_is_small_normal(small_arch):
    params = init_params(small_arch, 0)
    for module in params.modules().values():
        for m in module.modules():
            if isinstance(m, (nn.Conv2d, nn.ConvTranspose2d, nn.Linear)):
                assert float(m.weight.abs().max()) < 0.2
                if m.bias is not None:
                    assert float(m.bias.abs().max()) == 0.0


# ---------------------------------------------------------------------------
# grad_check
# ---------------------------------------------------------------------------

def test_grad_check_quadratic():
    p = torch.tensor([0.3, -1.2, 2.0, 0.7], dtype=torch.float64, requires_grad=True)
    report = grad_check(lambda: 0.5 * (p ** 2).sum(), [p], probe_count=4)
    assert report.passed
    assert report.max_relative_error < 1e-6


def test_grad_check_constant_loss():
    p = torch.ones(3, dtype=torch.float64, requires_grad=True)
    report = grad_check(lambda: torch.tensor(2.0, dtype=torch.float64), [p], probe_count=3)
    assert report.passed
    assert report.max_relative_error == 0.0


def test_grad_check_flags_a_wrong_gradient():
    p = torch.tensor([1.0, 2.0], dtype=torch.float64, requires_grad=True)

    def loss():
        # forward value is p^2, gradient reported as for 3 p^2 / 2
        return (p ** 2).sum() + (0.5 * p ** 2).sum() - (0.5 * p ** 2).sum().detach()

    assert not grad_check(loss, [p], probe_count=2).passed


@pytest.fixture
def toy():
    cfg = ArchitectureConfig.toy()
    params = init_params(cfg, seed=2).to(torch.float64)
    gen = torch.Generator().manual_seed(9)
    c = torch.rand(4, cfg.cond_dim, generator=gen, dtype=torch.float64)
    z = torch.randn(4, cfg.latent_dim, generator=gen, dtype=torch.float64)
    z2 = torch.randn(4, cfg.latent_dim, generator=gen, dtype=torch.float64)
    real = torch.rand(4, cfg.height, cfg.width, generator=gen, dtype=torch.float64)
    return params, c, z, z2, real


def _check(loss_fn, params):
    report = grad_check(loss_fn, params, probe_count=50, tolerance=1e-3)
    assert report.passed, report


def test_grad_check_aux_loss(toy):
    params, c, z, _, real = toy
    target = torch.tensor([[1.0, 2.0], [0.0, 3.0], [2.0, 2.0], [3.0, 0.0]], dtype=torch.float64)
    _check(lambda: aux_loss(regressor_forward(params, generator_forward(params, c, z)), target), params)


def test_grad_check_intensity_loss(toy):
    params, c, z, _, real = toy
    target = real.sum(dim=(1, 2))
    _check(lambda: intensity_loss_to_target(target, generator_forward(params, c, z)), params)


def test_grad_check_diversity_loss(toy):
    params, c, z, z2, _ = toy
    w = torch.full((4,), 0.5, dtype=torch.float64)
    _check(lambda: diversity_loss(w, generator_forward(params, c, z), generator_forward(params, c, z2), z, z2), params)


def test_grad_check_adversarial_losses(toy):
    params, c, z, _, real = toy
    _check(lambda: adversarial_g_loss(discriminator_forward(params, generator_forward(params, c, z), c)), params)
    _check(
        lambda: adversarial_d_loss(
            discriminator_forward(params, real, c),
            discriminator_forward(params, generator_forward(params, c, z), c),
        ),
        params,
    )


def test_grad_check_saturating_generator_loss(toy):
    params, c, z, _, _ = toy
    _check(lambda: adversarial_g_loss(discriminator_forward(params, generator_forward(params, c, z), c), saturating=True), params)


def test_grad_check_weighted_generator_objective(toy):
    params, c, z, z2, real = toy
    weights = LossWeights(lambda_div=0.3, lambda_in=1e-2, lambda_aux=0.2)
    w = torch.full((4,), 0.5, dtype=torch.float64)
    centers = torch.tensor([[1.0, 2.0], [0.0, 3.0], [2.0, 2.0], [3.0, 0.0]], dtype=torch.float64)

    def objective():
        fake = generator_forward(params, c, z)
        return weighted_total(
            adversarial_g_loss(discriminator_forward(params, fake, c)),
            diversity_loss(w, fake, generator_forward(params, c, z2), z, z2),
            intensity_loss_to_target(real.sum(dim=(1, 2)), fake),
            aux_loss(regressor_forward(params, fake), centers),
            weights,
        )

    _check(objective, params)


def test_grad_check_log_discriminator_wrt_pixels(toy):
    params, c, _, _, real = toy
    x = real.clone().requires_grad_(True)
    report = grad_check(lambda: torch.log(discriminator_forward(params, x, c)).sum(), [x], probe_count=16, tolerance=1e-3)
    assert report.passed, report


def test_grad_check_regressor_wrt_pixels(toy):
    params, _, _, _, real = toy
    x = real.clone().requires_grad_(True)
    report = grad_check(lambda: regressor_forward(params, x).sum(), [x], probe_count=16, tolerance=1e-3)
    assert report.passed, report
