"""Multi-scale exposure fusion of the per-level panoramas.

Per-pixel quality weights (contrast, saturation, well-exposedness) steer
a Laplacian-pyramid blend, which merges the differently exposed
panoramas without halos or hard seams.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .core import InputError, luminance
from .pano import PanoImage

logger = logging.getLogger(__name__)

# 5-tap binomial smoothing kernel.
KERNEL = np.array([1.0, 4.0, 6.0, 4.0, 1.0]) / 16.0

WEIGHT_FLOOR = 1e-12
EXPOSEDNESS_SIGMA = 0.2


@dataclass
class Pyramid:
    levels: list[np.ndarray]
    kind: str  # 'gaussian' or 'laplacian'

    def __post_init__(self):
        if self.kind not in ("gaussian", "laplacian"):
            raise InputError(f"unknown pyramid kind {self.kind!r}")
        if not self.levels:
            raise InputError("pyramid has no levels")


def max_depth(shape: tuple[int, ...]) -> int:
    return int(math.floor(math.log2(min(shape[0], shape[1])))) - 1

def default_depth(shape: tuple[int, ...]) -> int:
    """Deepest level keeps at least 4 pixels per side."""
    return max(int(math.floor(math.log2(min(shape[0], shape[1])))) - 2, 0)


def contrast(image: np.ndarray) -> np.ndarray:
    """Absolute Laplacian response of the gray image."""
    gray = luminance(np.asarray(image, dtype=np.float64)) / 255.0
    return np.abs(ndimage.laplace(gray, mode="reflect"))


def saturation(image: np.ndarray) -> np.ndarray:
    """Standard deviation across the color channels."""
    img = np.asarray(image, dtype=np.float64) / 255.0
    return img.std(axis=-1)


def well_exposedness(image: np.ndarray) -> np.ndarray:
    """Per-channel Gaussian affinity to mid-range, multiplied over RGB."""
    img = np.asarray(image, dtype=np.float64) / 255.0
    gauss = np.exp(-((img - 0.5) ** 2) / (2.0 * EXPOSEDNESS_SIGMA ** 2))
    return gauss.prod(axis=-1)


def quality_weight(image: np.ndarray) -> np.ndarray:
    """Product of the three quality measures, floored away from zero."""
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 3 or img.shape[2] != 3:
        raise InputError("quality weights are defined on RGB images")
    return contrast(img) * saturation(img) * well_exposedness(img) + WEIGHT_FLOOR


def normalize_weights(weights: list[np.ndarray]) -> list[np.ndarray]:
    """Pointwise normalization so the maps sum to one at every pixel."""
    if not weights:
        raise InputError("no weight maps to normalize")
    total = np.zeros_like(weights[0])
    for w in weights:
        if w.shape != weights[0].shape:
            raise InputError("weight maps differ in shape")
        total = total + w
    return [w / total for w in weights]


def _blur(image: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    out = ndimage.correlate1d(image, kernel, axis=0, mode="reflect")
    return ndimage.correlate1d(out, kernel, axis=1, mode="reflect")


def _reduce(image: np.ndarray) -> np.ndarray:
    return _blur(image, KERNEL)[::2, ::2]


def _expand(image: np.ndarray, target_shape: tuple[int, ...]) -> np.ndarray:
    """Zero-insertion upsample to an exact target shape, smoothed and
    renormalized so constants pass through unchanged at borders."""
    up = np.zeros(target_shape, dtype=np.float64)
    up[::2, ::2] = image
    coverage = np.zeros(target_shape[:2], dtype=np.float64)
    coverage[::2, ::2] = 1.0
    up = _blur(up, 2.0 * KERNEL)
    coverage = _blur(coverage, 2.0 * KERNEL)
    if up.ndim == 3:
        coverage = coverage[..., None]
    return up / coverage


def _check_depth(image: np.ndarray, depth: int) -> None:
    if depth < 0:
        raise InputError(f"pyramid depth must be non-negative, got {depth}")
    limit = max_depth(image.shape)
    if depth > limit:
        raise InputError(
            f"depth {depth} too large for {image.shape[0]}x{image.shape[1]} "
            f"(max {limit})"
        )


def gaussian_pyramid(image: np.ndarray, depth: int) -> Pyramid:
    """Repeated smooth-and-halve; level sizes round up on odd dimensions."""
    image = np.asarray(image, dtype=np.float64)
    _check_depth(image, depth)
    levels = [image]
    for _ in range(depth):
        levels.append(_reduce(levels[-1]))
    return Pyramid(levels=levels, kind="gaussian")


def laplacian_pyramid(image: np.ndarray, depth: int) -> Pyramid:
    """Band-pass residuals against the expanded next level; the coarsest
    level stores the remaining low-pass."""
    gauss = gaussian_pyramid(image, depth).levels
    levels = [
        gauss[k] - _expand(gauss[k + 1], gauss[k].shape)
        for k in range(len(gauss) - 1)
    ]
    levels.append(gauss[-1])
    return Pyramid(levels=levels, kind="laplacian")


def collapse(pyramid: Pyramid) -> np.ndarray:
    """Inverse of laplacian_pyramid, exact up to float rounding."""
    if pyramid.kind != "laplacian":
        raise InputError("only band-pass pyramids can be collapsed")
    levels = pyramid.levels
    out = levels[-1]
    for k in range(len(levels) - 2, -1, -1):
        out = _expand(out, levels[k].shape) + levels[k]
    return out


def fuse(panos: list[PanoImage], depth: int | None = None) -> PanoImage:
    """Blend the exposure-level panoramas in the band-pass domain using
    smoothed, pointwise-normalized quality weights."""
    if len(panos) != 3:
        raise InputError(f"fusion expects 3 panoramas, got {len(panos)}")
    layout = panos[0].layout
    shape = panos[0].data.shape
    for p in panos[1:]:
        if p.data.shape != shape:
            raise InputError("panoramas differ in shape")
    if depth is None:
        depth = default_depth(shape)

    weights = normalize_weights([quality_weight(p.data) for p in panos])
    fused_levels: list[np.ndarray] | None = None
    for pano, weight in zip(panos, weights):
        image_pyr = laplacian_pyramid(pano.data, depth).levels
        weight_pyr = gaussian_pyramid(weight, depth).levels
        contribution = [w[..., None] * l for w, l in zip(weight_pyr, image_pyr)]
        if fused_levels is None:
            fused_levels = contribution
        else:
            fused_levels = [f + c for f, c in zip(fused_levels, contribution)]

    fused = collapse(Pyramid(levels=fused_levels, kind="laplacian"))
    overshoot = max(float(fused.max()) - 255.0, -float(fused.min()), 0.0)
    if overshoot > 0.0:
        logger.debug("fusion pre-clamp overshoot: %.3f gray levels", overshoot)
    return PanoImage(data=np.clip(fused, 0.0, 255.0), layout=layout)
