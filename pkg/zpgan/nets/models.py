# zpgan/nets/models.py
import math

import torch
import torch.nn as nn

from zpgan.nets.schemas import ArchitectureConfig


def _downsampled(size: int, n_blocks: int) -> int:
    # kernel 3, stride 2, padding 1 gives ceil(size / 2) per block
    for _ in range(n_blocks):
        size = math.ceil(size / 2)
    return size


def _conv_stack(in_channels: int, cfg: ArchitectureConfig) -> nn.Sequential:
    layers = []
    ch = in_channels
    for i in range(cfg.n_blocks):
        out = cfg.base_channels * 2 ** i
        layers += [nn.Conv2d(ch, out, 3, stride=2, padding=1), nn.LeakyReLU(0.2)]
        ch = out
    return nn.Sequential(*layers)


class Generator(nn.Module):
    """G(z, c): dense projection onto the seed grid, transposed-conv upsampling, crop, non-negative output."""

    def __init__(self, cfg: ArchitectureConfig):
        super().__init__()
        self.cfg = cfg
        self.top_channels = cfg.base_channels * 2 ** (cfg.n_blocks - 1)

        self.project = nn.Linear(cfg.latent_dim + cfg.cond_dim, self.top_channels * cfg.seed_height * cfg.seed_width)
        self.project_norm = nn.BatchNorm2d(self.top_channels)

        blocks = []
        ch = self.top_channels
        for _ in range(cfg.n_blocks):
            out = max(cfg.base_channels, ch // 2)
            blocks += [nn.ConvTranspose2d(ch, out, 4, stride=2, padding=1, bias=False), nn.BatchNorm2d(out), nn.ReLU()]
            ch = out
        self.blocks = nn.Sequential(*blocks)
        self.to_image = nn.Conv2d(ch, 1, 3, padding=1)
        self.activation = nn.Softplus() if cfg.output_activation == "softplus" else nn.ReLU()

        scale = 2 ** cfg.n_blocks
        self.crop_top = (cfg.seed_height * scale - cfg.height) // 2
        self.crop_left = (cfg.seed_width * scale - cfg.width) // 2

    def forward(self, c: torch.Tensor, z: torch.Tensor) -> torch.Tensor:
        cfg = self.cfg
        h = self.project(torch.cat([z, c], dim=1))
        h = h.view(-1, self.top_channels, cfg.seed_height, cfg.seed_width)
        h = torch.relu(self.project_norm(h))
        h = self.to_image(self.blocks(h))
        h = h[:, 0, self.crop_top:self.crop_top + cfg.height, self.crop_left:self.crop_left + cfg.width]
        return self.activation(h)


class Discriminator(nn.Module):
    """D(x, c): the condition is embedded into one extra input plane."""

    def __init__(self, cfg: ArchitectureConfig):
        super().__init__()
        self.cfg = cfg
        self.embed = nn.Sequential(
            nn.Linear(cfg.cond_dim, cfg.conditioning_embed_dim),
            nn.LeakyReLU(0.2),
            nn.Linear(cfg.conditioning_embed_dim, cfg.height * cfg.width),
        )
        self.features = _conv_stack(2, cfg)
        flat = cfg.base_channels * 2 ** (cfg.n_blocks - 1) * _downsampled(cfg.height, cfg.n_blocks) * _downsampled(cfg.width, cfg.n_blocks)
        self.head = nn.Linear(flat, 1)

    def logits(self, x: torch.Tensor, c: torch.Tensor) -> torch.Tensor:
        plane = self.embed(c).view(-1, 1, self.cfg.height, self.cfg.width)
        h = self.features(torch.cat([x.unsqueeze(1), plane], dim=1))
        return self.head(h.flatten(1)).squeeze(1)

    def forward(self, x: torch.Tensor, c: torch.Tensor) -> torch.Tensor:
        return torch.sigmoid(self.logits(x, c))


class Regressor(nn.Module):
    """Predicts the (k, l) shower center; sigmoid outputs scaled to the image extent."""

    def __init__(self, cfg: ArchitectureConfig):
        super().__init__()
        self.cfg = cfg
        self.features = _conv_stack(1, cfg)
        flat = cfg.base_channels * 2 ** (cfg.n_blocks - 1) * _downsampled(cfg.height, cfg.n_blocks) * _downsampled(cfg.width, cfg.n_blocks)
        self.head = nn.Linear(flat, 2)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        h = self.features(x.unsqueeze(1)).flatten(1)
        scale = torch.tensor([self.cfg.height, self.cfg.width], dtype=h.dtype, device=h.device)
        return torch.sigmoid(self.head(h)) * scale
