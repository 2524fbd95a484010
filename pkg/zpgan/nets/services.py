# zpgan/nets/services.py
import copy
import logging
import math
from contextlib import contextmanager
from typing import Callable, Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
import torch
import torch.nn as nn

from zpgan.core.exceptions import NonFiniteLossError, ShapeMismatchError
from zpgan.nets.models import Discriminator, Generator, Regressor
from zpgan.nets.schemas import ArchitectureConfig, GradCheckReport

logger = logging.getLogger(__name__)

PARTS = ("generator", "discriminator", "regressor")
WEIGHT_STD = 0.02


class ModelParams:
    """Trainable state of G, D and the auxiliary regressor.

    named_tensors() is the flat, ordered view used by checkpoints.
    """

    def __init__(self, config: ArchitectureConfig, generator: Generator, discriminator: Discriminator, regressor: Regressor):
        self.config = config
        self.generator = generator
        self.discriminator = discriminator
        self.regressor = regressor

    def modules(self) -> Dict[str, nn.Module]:
        return {name: getattr(self, name) for name in PARTS}

    def named_tensors(self) -> List[Tuple[str, torch.Tensor]]:
        out = []
        for prefix, module in self.modules().items():
            for name, tensor in module.state_dict().items():
                if name.endswith("num_batches_tracked"):
                    continue
                out.append((f"{prefix}.{name}", tensor))
        return out

    def parameters(self, part: Optional[str] = None) -> List[torch.Tensor]:
        parts = [part] if part else list(PARTS)
        return [p for name in parts for p in getattr(self, name).parameters()]

    @property
    def dtype(self) -> torch.dtype:
        return next(self.generator.parameters()).dtype

    def to(self, dtype: torch.dtype) -> "ModelParams":
        for module in self.modules().values():
            module.to(dtype)
        return self

    def train(self) -> "ModelParams":
        for module in self.modules().values():
            module.train()
        return self

    def eval(self) -> "ModelParams":
        for module in self.modules().values():
            module.eval()
        return self

    def clone(self) -> "ModelParams":
        return copy.deepcopy(self)

    def equal(self, other: "ModelParams") -> bool:
        mine, theirs = self.named_tensors(), other.named_tensors()
        if [n for n, _ in mine] != [n for n, _ in theirs]:
            return False
        return all(torch.equal(a, b) for (_, a), (_, b) in zip(mine, theirs))


def _initialize(module: nn.Module, gen: torch.Generator) -> None:
    with torch.no_grad():
        for m in module.modules():
            if isinstance(m, (nn.Conv2d, nn.ConvTranspose2d, nn.Linear)):
                m.weight.copy_(torch.randn(m.weight.shape, generator=gen) * WEIGHT_STD)
                if m.bias is not None:
                    m.bias.zero_()
            elif isinstance(m, nn.BatchNorm2d):
                m.weight.copy_(1.0 + torch.randn(m.weight.shape, generator=gen) * WEIGHT_STD)
                m.bias.zero_()


def init_params(config: ArchitectureConfig, seed: int) -> ModelParams:
    """DCGAN initialization: N(0, 0.02) conv/dense weights, N(1, 0.02) batch-norm scales, zero biases."""
    # module constructors draw from the global RNG; keep that invisible to callers
    with torch.random.fork_rng(devices=[]):
        params = ModelParams(config, Generator(config), Discriminator(config), Regressor(config))
    gen = torch.Generator().manual_seed(int(seed))
    for module in params.modules().values():
        _initialize(module, gen)
    return params


# ---------------------------------------------------------------------------
# Forward passes
# ---------------------------------------------------------------------------

@contextmanager
def _evaluating(module: nn.Module) -> Iterator[nn.Module]:
    was_training = module.training
    module.eval()
    try:
        yield module
    finally:
        module.train(was_training)


def _as_tensor(value, dtype: torch.dtype) -> torch.Tensor:
    if isinstance(value, torch.Tensor):
        return value.to(dtype)
    return torch.as_tensor(np.asarray(value), dtype=dtype)


def _as_vectors(value, dim: int, dtype: torch.dtype, what: str) -> Tuple[torch.Tensor, bool]:
    t = _as_tensor(value, dtype)
    single = t.dim() == 1
    if single:
        t = t.unsqueeze(0)
    if t.dim() != 2 or t.shape[1] != dim:
        raise ShapeMismatchError(f"{what} must have trailing dimension {dim}, got shape {tuple(t.shape)}")
    return t, single


def _as_images(value, cfg: ArchitectureConfig, dtype: torch.dtype) -> Tuple[torch.Tensor, bool]:
    t = _as_tensor(value, dtype)
    single = t.dim() == 2
    if single:
        t = t.unsqueeze(0)
    if t.dim() != 3 or tuple(t.shape[1:]) != (cfg.height, cfg.width):
        raise ShapeMismatchError(f"response must be {cfg.height}x{cfg.width}, got shape {tuple(t.shape)}")
    return t, single


def generator_forward(params: ModelParams, c, z) -> torch.Tensor:
    """Inference-mode G(z, c); batch norm uses running statistics so the call is pure."""
    cfg = params.config
    c_t, single_c = _as_vectors(c, cfg.cond_dim, params.dtype, "conditioning vector")
    z_t, single_z = _as_vectors(z, cfg.latent_dim, params.dtype, "latent code")
    if c_t.shape[0] != z_t.shape[0]:
        raise ShapeMismatchError(f"batch sizes differ: {c_t.shape[0]} conditions vs {z_t.shape[0]} latents")
    with _evaluating(params.generator):
        x = params.generator(c_t, z_t)
    return x[0] if single_c and single_z else x


def discriminator_forward(params: ModelParams, x, c) -> torch.Tensor:
    cfg = params.config
    x_t, single = _as_images(x, cfg, params.dtype)
    c_t, _ = _as_vectors(c, cfg.cond_dim, params.dtype, "conditioning vector")
    out = params.discriminator(x_t, c_t)
    return out[0] if single else out


def regressor_forward(params: ModelParams, x) -> torch.Tensor:
    x_t, single = _as_images(x, params.config, params.dtype)
    out = params.regressor(x_t)
    return out[0] if single else out


# ---------------------------------------------------------------------------
# Finite-difference gradient check
# ---------------------------------------------------------------------------

def _named_leaves(params) -> List[Tuple[str, torch.Tensor]]:
    if isinstance(params, ModelParams):
        return [(f"{prefix}.{n}", p) for prefix, m in params.modules().items() for n, p in m.named_parameters()]
    if isinstance(params, nn.Module):
        return list(params.named_parameters())
    return [(f"tensor{i}", t) for i, t in enumerate(params)]


def grad_check(
    loss_fn: Callable[[], torch.Tensor],
    params: Union[ModelParams, nn.Module, Sequence[torch.Tensor]],
    probe_count: int = 50,
    tolerance: float = 1e-3,
    step: float = 1e-6,
    scale_floor: float = 1e-5,
    seed: int = 0,
) -> GradCheckReport:
    """Compare autograd against central differences on randomly chosen scalar entries.

    Relative error is |a - n| / max(|a|, |n|, scale_floor). Meant for float64 parameters.
    """
    leaves = _named_leaves(params)
    tensors = [t for _, t in leaves]

    loss = loss_fn()
    if not torch.isfinite(loss).all():
        raise NonFiniteLossError(f"loss is not finite at the probe point: {float(loss)}")
    if loss.requires_grad:
        grads = torch.autograd.grad(loss, tensors, allow_unused=True)
    else:
        grads = [None] * len(tensors)
    grads = [torch.zeros_like(t) if g is None else g.detach() for t, g in zip(tensors, grads)]

    sizes = np.array([t.numel() for t in tensors])
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    rng = np.random.default_rng(seed)
    picks = rng.choice(int(offsets[-1]), size=min(probe_count, int(offsets[-1])), replace=False)

    worst, worst_name, worst_index = 0.0, None, None
    for flat in sorted(int(p) for p in picks):
        ti = int(np.searchsorted(offsets, flat, side="right") - 1)
        i = flat - int(offsets[ti])
        view = tensors[ti].data.view(-1)
        original = view[i].item()
        with torch.no_grad():
            view[i] = original + step
            plus = float(loss_fn())
            view[i] = original - step
            minus = float(loss_fn())
            view[i] = original
        if not (math.isfinite(plus) and math.isfinite(minus)):
            raise NonFiniteLossError(f"loss is not finite when perturbing {leaves[ti][0]}[{i}]")
        numeric = (plus - minus) / (2.0 * step)
        analytic = float(grads[ti].reshape(-1)[i])
        err = abs(analytic - numeric) / max(abs(analytic), abs(numeric), scale_floor)
        if err > worst or worst_name is None:
            worst, worst_name, worst_index = err, leaves[ti][0], i

    report = GradCheckReport(
        max_relative_error=worst,
        probes=len(picks),
        tolerance=tolerance,
        passed=worst <= tolerance,
        worst_name=worst_name,
        worst_index=worst_index,
    )
    logger.debug("grad_check: %s probes, max rel err %.3g at %s[%s]", report.probes, worst, worst_name, worst_index)
    return report
