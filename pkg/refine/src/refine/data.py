"""Training data plumbing.

The stitcher is consumed strictly through its command line and file
contracts: `hdrstitch synth` writes a scene directory (views z<i>.png,
ground-truth targets zT_<i>_to_<j>.png), `hdrstitch stitch
--emit-intermediates` writes the physics renditions z<i>_to_<j>.png.
One training triple is (emitted rendition, source view, target) for
one direction.
"""

from __future__ import annotations

import shutil
import subprocess
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from PIL import Image

from .masks import DIRECTIONS, exposedness_mask


def primary_cli() -> list[str]:
    exe = shutil.which("hdrstitch")
    if exe is not None:
        return [exe]
    return [sys.executable, "-m", "hdrstitch.cli"]


def run_primary(args: list[str]) -> None:
    proc = subprocess.run(
        primary_cli() + args, capture_output=True, text=True
    )
    if proc.returncode != 0:
        raise RuntimeError(
            f"stitcher call failed ({proc.returncode}): "
            f"{' '.join(args)}\n{proc.stderr.strip()}"
        )


def load_image(path: Path | str) -> np.ndarray:
    with Image.open(path) as img:
        return np.asarray(img.convert("RGB"))


def save_image(image: np.ndarray, path: Path | str) -> None:
    image = np.asarray(image)
    if image.dtype != np.uint8:
        raise ValueError("only 8-bit images are written")
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(image, mode="RGB").save(path)


def degrade_views(
    scene_dir: Path | str,
    rng: np.random.Generator,
    noise_sigma: float,
    tone_gamma: float,
) -> None:
    """Perturb the captured views in place: a shared tone curve plus
    additive sensor noise. Ground-truth renditions stay clean. Because
    the intensity mappings are estimated between two equally degraded
    views, the physics renditions come out on the degraded tone scale,
    so the refiner has a systematic, value-dependent error to undo
    instead of renditions that are exact already."""
    values = np.arange(256) / 255.0
    lut = np.clip(np.rint(255.0 * values ** tone_gamma), 0, 255)
    for k in (1, 2, 3):
        path = Path(scene_dir) / f"z{k}.png"
        view = lut[load_image(path)]
        noisy = view + rng.normal(0.0, noise_sigma, view.shape)
        save_image(np.clip(np.rint(noisy), 0, 255).astype(np.uint8), path)


def synthesize_training_scene(
    seed: int,
    scene_dir: Path | str,
    emit_dir: Path | str,
    view_size: tuple[int, int] = (480, 640),
    overlaps: tuple[int, int] = (200, 200),
    noise_sigma: float = 2.0,
    tone_gamma: float = 1.15,
) -> None:
    """Render one scene and its physics renditions via the stitcher CLI."""
    height, width = view_size
    run_primary([
        "synth", "--seed", str(seed), "--out", str(scene_dir),
        "--view-width", str(width), "--view-height", str(height),
        "--overlap12", str(overlaps[0]), "--overlap23", str(overlaps[1]),
    ])
    if noise_sigma > 0 or tone_gamma != 1.0:
        degrade_views(
            scene_dir, np.random.default_rng(seed), noise_sigma, tone_gamma
        )
    run_primary([
        "stitch", "--input", str(scene_dir),
        "--output", str(Path(emit_dir) / "pano.png"),
        "--emit-intermediates", str(emit_dir),
    ])


@dataclass
class TrainingTriple:
    rendition: np.ndarray   # physics result Z for one direction, uint8
    source: np.ndarray      # the view the rendition was mapped from
    target: np.ndarray      # ground-truth rendition
    direction: tuple[int, int]

    def __post_init__(self):
        shapes = {self.rendition.shape, self.source.shape, self.target.shape}
        if len(shapes) != 1:
            raise ValueError(f"triple images differ in shape: {shapes}")
        if self.direction not in DIRECTIONS:
            raise ValueError(f"invalid direction: {self.direction}")


def load_triples(scene_dir: Path | str, emit_dir: Path | str) -> list[TrainingTriple]:
    scene_dir = Path(scene_dir)
    emit_dir = Path(emit_dir)
    triples = []
    for i, j in DIRECTIONS:
        triples.append(TrainingTriple(
            rendition=load_image(emit_dir / f"z{i}_to_{j}.png"),
            source=load_image(scene_dir / f"z{i}.png"),
            target=load_image(scene_dir / f"zT_{i}_to_{j}.png"),
            direction=(i, j),
        ))
    return triples


def _to_chw(image: np.ndarray) -> torch.Tensor:
    return torch.from_numpy(
        np.ascontiguousarray(image.transpose(2, 0, 1)).astype(np.float32)
    )


class TripleDataset:
    """In-memory triples with random aligned crops for training batches."""

    def __init__(self, triples: list[TrainingTriple]):
        if not triples:
            raise ValueError("empty dataset")
        self.triples = triples
        # Masks depend only on the source view; precompute once.
        self._masks = [
            exposedness_mask(t.source, t.direction) for t in triples
        ]

    def __len__(self) -> int:
        return len(self.triples)

    def crop_size(self, requested: int) -> int:
        height = min(t.rendition.shape[0] for t in self.triples)
        width = min(t.rendition.shape[1] for t in self.triples)
        size = min(requested, height, width)
        return max(4, size - size % 4)

    def sample_batch(
        self, rng: np.random.Generator, batch_size: int, crop: int
    ) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
        crop = self.crop_size(crop)
        renditions, masks, targets = [], [], []
        for _ in range(batch_size):
            index = int(rng.integers(len(self.triples)))
            triple = self.triples[index]
            h, w = triple.rendition.shape[:2]
            top = int(rng.integers(h - crop + 1))
            left = int(rng.integers(w - crop + 1))
            window = (slice(top, top + crop), slice(left, left + crop))
            renditions.append(_to_chw(triple.rendition[window]))
            targets.append(_to_chw(triple.target[window]))
            masks.append(torch.from_numpy(
                self._masks[index][window].astype(np.float32)
            ).unsqueeze(0))
        return (
            torch.stack(renditions),
            torch.stack(masks),
            torch.stack(targets),
        )

    def full_tensors(
        self, index: int
    ) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
        triple = self.triples[index]
        return (
            _to_chw(triple.rendition).unsqueeze(0),
            torch.from_numpy(self._masks[index].astype(np.float32))[None, None],
            _to_chw(triple.target).unsqueeze(0),
        )
