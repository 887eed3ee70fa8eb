"""Small mask-guided residual network for rendition refinement.

Three-scale encoder/decoder of residual blocks with additive skips,
plus a parallel guidance branch conditioned on the exposedness mask
whose features are injected into the full-resolution trunk. The head
is zero-initialized, so a fresh network is an exact identity map and
training only ever learns a correction on top of the physics result.
"""

from __future__ import annotations

import torch
from torch import nn
from torch.nn import functional as F


class ResidualBlock(nn.Module):
    def __init__(self, channels: int):
        super().__init__()
        self.conv1 = nn.Conv2d(channels, channels, 3, padding=1)
        self.conv2 = nn.Conv2d(channels, channels, 3, padding=1)
        self.act = nn.LeakyReLU(0.2)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return x + self.conv2(self.act(self.conv1(x)))


class RefineNet(nn.Module):
    """Residual refiner: output = clamp(input + predicted residual).

    Input rendition (B, 3, H, W) in 0..255 with H, W divisible by 4,
    mask (B, 1, H, W) with values in {0, 1}.
    """

    def __init__(self, base: int = 32):
        super().__init__()
        c1, c2, c3 = base, base + base // 2, base * 2
        self.stem = nn.Conv2d(3, c1, 3, padding=1)
        self.enc1 = ResidualBlock(c1)
        self.down1 = nn.Conv2d(c1, c2, 3, stride=2, padding=1)
        self.enc2 = ResidualBlock(c2)
        self.down2 = nn.Conv2d(c2, c3, 3, stride=2, padding=1)
        self.bottom = ResidualBlock(c3)
        self.up1 = nn.Conv2d(c3, c2, 3, padding=1)
        self.dec1 = ResidualBlock(c2)
        self.up2 = nn.Conv2d(c2, c1, 3, padding=1)
        self.dec2 = ResidualBlock(c1)
        self.guide = nn.Sequential(
            nn.Conv2d(4, 16, 3, padding=1), nn.LeakyReLU(0.2),
            nn.Conv2d(16, 16, 3, padding=1), nn.LeakyReLU(0.2),
            nn.Conv2d(16, c1, 3, padding=1),
        )
        self.head = nn.Conv2d(c1, 3, 3, padding=1)
        nn.init.zeros_(self.head.weight)
        nn.init.zeros_(self.head.bias)
        self.act = nn.LeakyReLU(0.2)

    def forward(self, rendition: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
        if rendition.ndim != 4 or rendition.shape[1] != 3:
            raise ValueError(f"rendition must be (B, 3, H, W), got {tuple(rendition.shape)}")
        if mask.shape[0] != rendition.shape[0] or mask.shape[-2:] != rendition.shape[-2:]:
            raise ValueError(
                f"mask shape {tuple(mask.shape)} does not match rendition "
                f"{tuple(rendition.shape)}"
            )
        h, w = rendition.shape[-2:]
        if h % 4 or w % 4:
            raise ValueError(f"height and width must be divisible by 4, got {h}x{w}")
        if mask.ndim == 3:
            mask = mask.unsqueeze(1)

        x = rendition / 255.0
        g = self.guide(torch.cat([x, mask], dim=1))
        e1 = self.enc1(self.act(self.stem(x)) + g)
        e2 = self.enc2(self.act(self.down1(e1)))
        b = self.bottom(self.act(self.down2(e2)))
        u1 = self.dec1(self.act(self.up1(F.interpolate(b, scale_factor=2, mode="nearest"))) + e2)
        u2 = self.dec2(self.act(self.up2(F.interpolate(u1, scale_factor=2, mode="nearest"))) + e1)
        residual = self.head(u2) * 255.0
        return torch.clamp(rendition + residual, 0.0, 255.0)


def parameter_count(model: nn.Module) -> int:
    return sum(p.numel() for p in model.parameters())
