# zpgan/losses/services.py
"""Loss terms of the generator objective.

Every function takes and returns torch tensors so it can sit inside the
training graph; plain Python sequences are accepted for convenience.
"""
import math
from typing import Union

import torch

from zpgan.core.exceptions import NonFiniteLossError
from zpgan.losses.schemas import LossBreakdown, LossWeights

LOG_EPS = 1e-7
DIVERSITY_EPS = 1e-4

Number = Union[float, torch.Tensor]


def _tensor(value) -> torch.Tensor:
    if isinstance(value, torch.Tensor):
        return value
    return torch.as_tensor(value, dtype=torch.float64)


def _probabilities(d) -> torch.Tensor:
    d = _tensor(d)
    if d.numel() == 0:
        raise ValueError("discriminator outputs must be non-empty")
    return d.clamp(LOG_EPS, 1.0 - LOG_EPS)


def adversarial_d_loss(d_real, d_fake) -> torch.Tensor:
    """-mean log D(x) - mean log(1 - D(G(z))); minimized by the discriminator."""
    d_real, d_fake = _probabilities(d_real), _probabilities(d_fake)
    if d_real.shape != d_fake.shape:
        raise ValueError(f"real and fake batches differ in shape: {tuple(d_real.shape)} vs {tuple(d_fake.shape)}")
    return -torch.log(d_real).mean() - torch.log(1.0 - d_fake).mean()


def adversarial_g_loss(d_fake, saturating: bool = False) -> torch.Tensor:
    """Non-saturating -mean log D(G(z)) by default; saturating=True gives mean log(1 - D(G(z)))."""
    d_fake = _probabilities(d_fake)
    if saturating:
        return torch.log(1.0 - d_fake).mean()
    return -torch.log(d_fake).mean()


def aux_loss(predicted, target) -> torch.Tensor:
    predicted, target = _tensor(predicted), _tensor(target)
    if predicted.shape != target.shape or predicted.shape[-1] != 2:
        raise ValueError(f"expected matching (N, 2) coordinates, got {tuple(predicted.shape)} and {tuple(target.shape)}")
    return ((predicted - target) ** 2).sum(dim=-1).mean()


def _pixel_sum(x: torch.Tensor) -> torch.Tensor:
    return x.sum(dim=(-2, -1))


def intensity_loss(x_ref, x_gen) -> torch.Tensor:
    """|f_in(x_ref) - f_in(x_gen)|, averaged over a batch of pairs."""
    x_ref, x_gen = _tensor(x_ref), _tensor(x_gen)
    return (_pixel_sum(x_ref) - _pixel_sum(x_gen)).abs().mean()


def intensity_loss_to_target(target_intensity, x_gen) -> torch.Tensor:
    """Same as intensity_loss with precomputed reference sums (one per generated image)."""
    x_gen = _tensor(x_gen)
    target = _tensor(target_intensity).to(x_gen.dtype)
    return (target - _pixel_sum(x_gen)).abs().mean()


def diversity_loss(weight, x1, x2, z1, z2, eps: float = DIVERSITY_EPS) -> torch.Tensor:
    """weight * d_z / (d_I + eps) with mean absolute distances; batch version averages the pairs."""
    x1, x2, z1, z2 = _tensor(x1), _tensor(x2), _tensor(z1), _tensor(z2)
    if x1.dim() == 2:
        x1, x2 = x1.unsqueeze(0), x2.unsqueeze(0)
    if z1.dim() == 1:
        z1, z2 = z1.unsqueeze(0), z2.unsqueeze(0)
    weight = _tensor(weight).to(x1.dtype).reshape(-1)

    d_z = (z1 - z2).abs().mean(dim=1)
    if bool((d_z == 0).any()):
        raise ValueError("diversity pairs need two distinct latent codes")
    d_i = (x1 - x2).abs().mean(dim=(-2, -1))
    return (weight * d_z.to(x1.dtype) / (d_i + eps)).mean()


def weighted_total(adv: Number, div: Number, intensity: Number, aux: Number, w: LossWeights) -> Number:
    """adv + weighted extra terms; works on floats and on tensors that still carry gradients."""
    return adv + w.lambda_div * div + w.lambda_in * intensity + w.lambda_aux * aux


def total_generator_loss(adv: Number, div: Number, intensity: Number, aux: Number, w: LossWeights) -> LossBreakdown:
    terms = {"adv": adv, "div": div, "intensity": intensity, "aux": aux}
    values = {k: float(v.detach()) if isinstance(v, torch.Tensor) else float(v) for k, v in terms.items()}
    bad = [k for k, v in values.items() if not math.isfinite(v)]
    if bad:
        raise NonFiniteLossError(f"non-finite loss terms: {', '.join(bad)}")
    total = weighted_total(values["adv"], values["div"], values["intensity"], values["aux"], w)
    return LossBreakdown(total=total, **values)
