"""Training loop: Adam with a cosine-annealed learning rate."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .data import TrainingTriple, TripleDataset
from .losses import FeatureExtractor, total_loss
from .model import RefineNet


class TrainingDivergedError(RuntimeError):
    """Loss became non-finite; mapped to CLI exit code 3."""


@dataclass
class TrainConfig:
    color_weight: float = 0.01
    feature_weight: float = 0.01
    learning_rate: float = 1e-5
    batch_size: int = 8
    iterations: int = 200
    crop: int = 128
    seed: int = 0
    feature_source: str = "auto"

    def __post_init__(self):
        if self.color_weight < 0 or self.feature_weight < 0:
            raise ValueError("loss weights must be non-negative")
        if self.learning_rate <= 0:
            raise ValueError(f"learning rate must be positive, got {self.learning_rate}")
        if self.batch_size < 1:
            raise ValueError(f"batch size must be at least 1, got {self.batch_size}")
        if self.iterations < 1:
            raise ValueError(f"iterations must be at least 1, got {self.iterations}")
        if self.crop < 4:
            raise ValueError(f"crop must be at least 4, got {self.crop}")


def _as_dataset(dataset) -> TripleDataset:
    if isinstance(dataset, TripleDataset):
        return dataset
    return TripleDataset(list(dataset))


def train(
    dataset: TripleDataset | list[TrainingTriple],
    cfg: TrainConfig | None = None,
) -> tuple[RefineNet, list[dict]]:
    """Fit the refiner on the triples; returns the model and the
    per-iteration loss breakdown."""
    cfg = cfg or TrainConfig()
    data = _as_dataset(dataset)
    torch.manual_seed(cfg.seed)
    rng = np.random.default_rng(cfg.seed)

    model = RefineNet()
    extractor = FeatureExtractor(cfg.feature_source)
    optimizer = torch.optim.Adam(model.parameters(), lr=cfg.learning_rate)
    scheduler = torch.optim.lr_scheduler.CosineAnnealingLR(
        optimizer, T_max=cfg.iterations
    )
    history: list[dict] = []
    model.train()
    for iteration in range(cfg.iterations):
        rendition, mask, target = data.sample_batch(rng, cfg.batch_size, cfg.crop)
        pred = model(rendition, mask)
        loss, parts = total_loss(
            pred, target, extractor, cfg.color_weight, cfg.feature_weight
        )
        if not torch.isfinite(loss):
            raise TrainingDivergedError(
                f"loss became non-finite at iteration {iteration}"
            )
        optimizer.zero_grad()
        loss.backward()
        optimizer.step()
        scheduler.step()
        history.append(parts)
    model.eval()
    return model, history


def reconstruction_error(
    model: RefineNet, dataset: TripleDataset | list[TrainingTriple]
) -> float:
    """Full-image reconstruction loss summed over the dataset."""
    data = _as_dataset(dataset)
    model.eval()
    total = 0.0
    with torch.no_grad():
        for index in range(len(data)):
            rendition, mask, target = data.full_tensors(index)
            total += float((model(rendition, mask) - target).abs().sum())
    return total


def smoothed_totals(history: list[dict], window: int = 20) -> np.ndarray:
    """Moving average of the total loss, for trend checks."""
    totals = np.array([entry["total"] for entry in history], dtype=np.float64)
    if totals.size < window:
        return totals
    kernel = np.ones(window) / window
    return np.convolve(totals, kernel, mode="valid")


def save_weights(model: RefineNet, path: Path | str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    torch.save({"state_dict": model.state_dict()}, path)


def load_weights(path: Path | str) -> RefineNet:
    payload = torch.load(Path(path), map_location="cpu")
    model = RefineNet()
    model.load_state_dict(payload["state_dict"])
    model.eval()
    return model
