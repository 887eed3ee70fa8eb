"""Fidelity metrics for comparing renditions and panoramas."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import signal

from .core import InputError, luminance

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03
DYNAMIC_RANGE = 255.0


def psnr(a: np.ndarray, b: np.ndarray) -> float:
    """Peak signal-to-noise ratio in dB over all samples; identical
    inputs return infinity."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise InputError(f"shape mismatch: {a.shape} vs {b.shape}")
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(DYNAMIC_RANGE ** 2 / mse)


def _gaussian_window() -> np.ndarray:
    offsets = np.arange(SSIM_WINDOW, dtype=np.float64) - (SSIM_WINDOW - 1) / 2.0
    taps = np.exp(-(offsets ** 2) / (2.0 * SSIM_SIGMA ** 2))
    window = np.outer(taps, taps)
    return window / window.sum()


def ssim(a: np.ndarray, b: np.ndarray) -> float:
    """Mean single-scale structural similarity of the gray images,
    computed over fully covered window positions."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise InputError(f"shape mismatch: {a.shape} vs {b.shape}")
    ga = luminance(a) if a.ndim == 3 else a
    gb = luminance(b) if b.ndim == 3 else b
    if min(ga.shape) < SSIM_WINDOW:
        raise InputError(
            f"images must be at least {SSIM_WINDOW}x{SSIM_WINDOW} for SSIM"
        )
    window = _gaussian_window()

    def filt(img: np.ndarray) -> np.ndarray:
        return signal.convolve2d(img, window, mode="valid")

    mu_a = filt(ga)
    mu_b = filt(gb)
    var_a = filt(ga * ga) - mu_a ** 2
    var_b = filt(gb * gb) - mu_b ** 2
    cov = filt(ga * gb) - mu_a * mu_b
    c1 = (SSIM_K1 * DYNAMIC_RANGE) ** 2
    c2 = (SSIM_K2 * DYNAMIC_RANGE) ** 2
    score = ((2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)) / (
        (mu_a ** 2 + mu_b ** 2 + c1) * (var_a + var_b + c2)
    )
    return float(score.mean())


@dataclass
class MetricReport:
    psnr: float | None = None
    ssim: float | None = None
    per_channel: dict[str, tuple[float, float, float]] | None = None

    def lines(self) -> list[str]:
        out = []
        if self.psnr is not None:
            out.append(f"psnr={self.psnr:.6f}")
        if self.ssim is not None:
            out.append(f"ssim={self.ssim:.6f}")
        if self.per_channel:
            for name, values in self.per_channel.items():
                joined = ",".join(f"{v:.6f}" for v in values)
                out.append(f"{name}_rgb={joined}")
        return out


def evaluate(
    pred: np.ndarray,
    gt: np.ndarray,
    metric_names: tuple[str, ...] = ("psnr", "ssim"),
    per_channel: bool = False,
) -> MetricReport:
    report = MetricReport()
    for name in metric_names:
        if name == "psnr":
            report.psnr = psnr(pred, gt)
        elif name == "ssim":
            report.ssim = ssim(pred, gt)
        else:
            raise InputError(f"unknown metric {name!r}")
    if per_channel and "psnr" in metric_names:
        report.per_channel = {
            "psnr": tuple(psnr(pred[..., c], gt[..., c]) for c in range(3))
        }
    return report
