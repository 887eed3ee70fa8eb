"""Training losses: pixel reconstruction, color angle, frozen features.

All losses take image tensors in the 0..255 range with the channel
axis at -3, i.e. (3, H, W) or (B, 3, H, W). Optional masks have no
channel axis, (H, W) or (B, H, W), and gate per-pixel contributions
without disturbing the angle computation at masked pixels.
"""

from __future__ import annotations

import torch
from torch import nn

COS_EPS = 1e-8
# arccos has unbounded slope at +-1; identical pred/target pixels land
# exactly on 1.0 in float32 and would turn the backward pass into NaN,
# so the cosine is clamped a hair inside the open interval. Shifts the
# angle of perfectly collinear pixels by ~1.4e-3 rad.
COS_MARGIN = 1e-6
DEFAULT_COLOR_WEIGHT = 0.01
DEFAULT_FEATURE_WEIGHT = 0.01


def _check_shapes(pred: torch.Tensor, target: torch.Tensor) -> None:
    if pred.shape != target.shape:
        raise ValueError(
            f"shape mismatch: {tuple(pred.shape)} vs {tuple(target.shape)}"
        )


def loss_reconstruction(
    pred: torch.Tensor, target: torch.Tensor, mask: torch.Tensor | None = None
) -> torch.Tensor:
    """Sum of absolute differences over every element."""
    _check_shapes(pred, target)
    diff = (pred - target).abs()
    if mask is not None:
        diff = diff * mask.unsqueeze(-3)
    return diff.sum()


def loss_color(
    pred: torch.Tensor, target: torch.Tensor, mask: torch.Tensor | None = None
) -> torch.Tensor:
    """Summed per-pixel angle between the RGB vectors."""
    _check_shapes(pred, target)
    dot = (pred * target).sum(dim=-3)
    norms = torch.linalg.vector_norm(pred, dim=-3) * torch.linalg.vector_norm(
        target, dim=-3
    )
    cosine = torch.clamp(
        dot / (norms + COS_EPS), -1.0 + COS_MARGIN, 1.0 - COS_MARGIN
    )
    angle = torch.arccos(cosine)
    if mask is not None:
        angle = angle * mask
    return angle.sum()


class FeatureExtractor(nn.Module):
    """Frozen convolutional stack for the perceptual term.

    ``source="auto"`` tries the torchvision VGG16 backbone through the
    third-block activation and falls back to a deterministic randomly
    initialized stack of the same flavor when the pretrained weights
    cannot be fetched; ``"fallback"`` forces the latter (used by the
    tests so they never depend on the network). Weights are frozen
    either way; ``.source`` records which stack is active.
    """

    _IMAGENET_MEAN = (0.485, 0.456, 0.406)
    _IMAGENET_STD = (0.229, 0.224, 0.225)

    def __init__(self, source: str = "auto"):
        super().__init__()
        if source not in ("auto", "torchvision", "fallback"):
            raise ValueError(f"unknown extractor source: {source}")
        layers = None
        self.source = "fallback"
        if source in ("auto", "torchvision"):
            try:
                from torchvision import models

                backbone = models.vgg16(weights=models.VGG16_Weights.IMAGENET1K_V1)
                layers = backbone.features[:16]
                self.source = "torchvision"
            except Exception:
                if source == "torchvision":
                    raise
        if layers is None:
            layers = self._fallback_stack()
        self.layers = layers
        self.layers.eval()
        for p in self.layers.parameters():
            p.requires_grad_(False)

    @staticmethod
    def _fallback_stack() -> nn.Sequential:
        gen = torch.Generator().manual_seed(951217)

        def conv(cin: int, cout: int) -> nn.Conv2d:
            layer = nn.Conv2d(cin, cout, 3, padding=1)
            bound = (6.0 / (cin * 9)) ** 0.5
            weight = (torch.rand(layer.weight.shape, generator=gen) - 0.5) * 2 * bound
            with torch.no_grad():
                layer.weight.copy_(weight)
                layer.bias.zero_()
            return layer

        return nn.Sequential(
            conv(3, 16), nn.ReLU(inplace=False),
            conv(16, 16), nn.ReLU(inplace=False),
            nn.MaxPool2d(2),
            conv(16, 32), nn.ReLU(inplace=False),
            conv(32, 32), nn.ReLU(inplace=False),
        )

    def forward(self, image: torch.Tensor) -> torch.Tensor:
        x = image / 255.0
        if x.ndim == 3:
            x = x.unsqueeze(0)
        if self.source == "torchvision":
            mean = x.new_tensor(self._IMAGENET_MEAN).view(1, 3, 1, 1)
            std = x.new_tensor(self._IMAGENET_STD).view(1, 3, 1, 1)
            x = (x - mean) / std
        return self.layers(x)


def loss_feature(
    pred: torch.Tensor, target: torch.Tensor, extractor: FeatureExtractor
) -> torch.Tensor:
    """Squared feature difference averaged over spatial positions."""
    _check_shapes(pred, target)
    fp = extractor(pred)
    ft = extractor(target)
    diff = fp - ft
    spatial = diff.shape[-1] * diff.shape[-2]
    return (diff * diff).sum() / spatial


def weighted_total(
    l_r: torch.Tensor | float,
    l_c: torch.Tensor | float,
    l_f: torch.Tensor | float,
    color_weight: float = DEFAULT_COLOR_WEIGHT,
    feature_weight: float = DEFAULT_FEATURE_WEIGHT,
):
    if color_weight < 0 or feature_weight < 0:
        raise ValueError("loss weights must be non-negative")
    return l_r + color_weight * l_c + feature_weight * l_f


def total_loss(
    pred: torch.Tensor,
    target: torch.Tensor,
    extractor: FeatureExtractor,
    color_weight: float = DEFAULT_COLOR_WEIGHT,
    feature_weight: float = DEFAULT_FEATURE_WEIGHT,
    mask: torch.Tensor | None = None,
) -> tuple[torch.Tensor, dict]:
    """Weighted sum of the three terms plus a breakdown for logging."""
    l_r = loss_reconstruction(pred, target, mask)
    l_c = loss_color(pred, target, mask)
    l_f = loss_feature(pred, target, extractor)
    total = weighted_total(l_r, l_c, l_f, color_weight, feature_weight)
    parts = {
        "reconstruction": float(l_r.detach()),
        "color": float(l_c.detach()),
        "feature": float(l_f.detach()),
        "total": float(total.detach()),
    }
    return total, parts
