"""Inference: write refined renditions to the --refined-dir contract."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import torch
from torch.nn import functional as F

from .data import load_image, save_image
from .masks import DIRECTIONS, exposedness_mask
from .model import RefineNet


def _pad4(tensor: torch.Tensor) -> tuple[torch.Tensor, int, int]:
    h, w = tensor.shape[-2:]
    pad_h = (-h) % 4
    pad_w = (-w) % 4
    if pad_h or pad_w:
        tensor = F.pad(tensor, (0, pad_w, 0, pad_h), mode="replicate")
    return tensor, h, w


def refine_rendition(
    model: RefineNet, rendition: np.ndarray, mask: np.ndarray
) -> np.ndarray:
    """Run one rendition through the refiner; any size, 8-bit in and out."""
    zm = torch.from_numpy(
        np.ascontiguousarray(rendition.transpose(2, 0, 1)).astype(np.float32)
    ).unsqueeze(0)
    m = torch.from_numpy(mask.astype(np.float32))[None, None]
    zm, h, w = _pad4(zm)
    m, _, _ = _pad4(m)
    model.eval()
    with torch.no_grad():
        out = model(zm, m)[0, :, :h, :w]
    values = out.numpy().transpose(1, 2, 0)
    return np.clip(np.floor(values + 0.5), 0, 255).astype(np.uint8)


def infer(
    scene_dir: Path | str,
    renditions_dir: Path | str,
    model: RefineNet,
    out_dir: Path | str,
) -> list[Path]:
    """Refine all six directions; returns the written file paths."""
    scene_dir = Path(scene_dir)
    renditions_dir = Path(renditions_dir)
    out_dir = Path(out_dir)
    written = []
    for i, j in DIRECTIONS:
        rendition = load_image(renditions_dir / f"z{i}_to_{j}.png")
        source = load_image(scene_dir / f"z{i}.png")
        if rendition.shape != source.shape:
            raise ValueError(
                f"rendition z{i}_to_{j} shape {rendition.shape} does not "
                f"match view z{i} shape {source.shape}"
            )
        mask = exposedness_mask(source, (i, j))
        refined = refine_rendition(model, rendition, mask)
        path = out_dir / f"z{i}_to_{j}.png"
        save_image(refined, path)
        written.append(path)
    return written
