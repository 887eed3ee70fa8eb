"""Intensity mapping functions estimated by weighted histogram averaging.

Bin-level correspondence between two 256-bin histograms: each source bin
is matched to the cumulative-count-aligned span of target bins, split
into sub-bins at the span ends, and mapped to the sub-bin-weighted mean
target intensity. Works purely on value distributions, so it needs no
pixel correspondence and tolerates moderate misregistration.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import InputError

BINS = 256


def histogram(image: np.ndarray, channel: int) -> np.ndarray:
    """256-bin count histogram of one channel of an 8-bit image."""
    if channel not in (0, 1, 2):
        raise InputError(f"channel must be 0..2, got {channel}")
    image = np.asarray(image)
    if image.dtype != np.uint8:
        raise InputError(f"histogram expects 8-bit samples, got {image.dtype}")
    return np.bincount(image[..., channel].ravel(), minlength=BINS).astype(np.int64)


def cumulative(hist: np.ndarray) -> np.ndarray:
    """Running total of a histogram; last entry is the sample count."""
    hist = np.asarray(hist)
    if hist.shape != (BINS,):
        raise InputError(f"expected {BINS} bins, got shape {hist.shape}")
    if (hist < 0).any():
        raise InputError("histogram counts must be non-negative")
    return np.cumsum(hist, dtype=np.int64)


def _check_totals(ci: np.ndarray, cj: np.ndarray) -> None:
    if ci.shape != (BINS,) or cj.shape != (BINS,):
        raise InputError("cumulative histograms must have 256 entries")
    if ci[-1] <= 0 or cj[-1] <= 0:
        raise InputError("empty histogram")
    if ci[-1] != cj[-1]:
        raise InputError(f"mismatched totals: {ci[-1]} vs {cj[-1]}")


def psi(ci: np.ndarray, cj: np.ndarray, z: int) -> int:
    """Smallest target bin k whose running total reaches the source's at z,
    i.e. the unique k with cj[k-1] < ci[z] <= cj[k] (cj[-1] taken as 0).
    z = -1 is allowed and maps to 0, matching the sub-bin span convention."""
    _check_totals(ci, cj)
    if not -1 <= z < BINS:
        raise InputError(f"bin out of range: {z}")
    if z == -1:
        return 0
    return int(np.searchsorted(cj, ci[z], side="left"))


def _psi_table(ci: np.ndarray, cj: np.ndarray) -> np.ndarray:
    return np.searchsorted(cj, ci, side="left")


def subbin_mass(
    ci: np.ndarray, cj: np.ndarray, z: int, k: int
) -> float:
    """Portion of source bin z that lands in target bin k.

    Non-zero only for k within [psi(z-1), psi(z)]; the two boundary bins
    receive the cumulative-count differences, interior bins their full
    target count. Summed over k this reproduces the source bin count.
    """
    _check_totals(ci, cj)
    if not 0 <= z < BINS or not 0 <= k < BINS:
        raise InputError(f"bin out of range: z={z}, k={k}")
    lo = int(np.searchsorted(cj, ci[z - 1], side="left")) if z > 0 else 0
    hi = int(np.searchsorted(cj, ci[z], side="left"))
    if not lo <= k <= hi:
        return 0.0
    ci_prev = float(ci[z - 1]) if z > 0 else 0.0
    if lo == hi:
        return float(ci[z]) - ci_prev
    if k == lo:
        return float(cj[k]) - ci_prev
    if k == hi:
        return float(ci[z]) - float(cj[k - 1])
    return float(cj[k]) - float(cj[k - 1])


def build_imf(
    hi: np.ndarray, hj: np.ndarray, normalize: bool = False
) -> tuple[np.ndarray, np.ndarray]:
    """Single-channel mapping table from histogram hi to histogram hj.

    Returns ``(lam, defined)``: mapped intensity per source bin, and a
    mask of bins that actually held samples. Empty source bins carry NaN
    until interpolated by fill_empty_bins. With ``normalize`` set, counts
    are reduced to relative frequencies first, which permits inputs with
    differing sample counts.

    Parameters
    ----------
    hi, hj : ndarray
        256-bin count histograms of the source and target images.
    normalize : bool
        Match on relative frequencies instead of raw counts.
    """
    ci = cumulative(hi).astype(np.float64)
    cj = cumulative(hj).astype(np.float64)
    if ci[-1] <= 0 or cj[-1] <= 0:
        raise InputError("empty histogram")
    if ci[-1] != cj[-1]:
        if not normalize:
            raise InputError(f"mismatched totals: {int(ci[-1])} vs {int(cj[-1])}")
        ci = ci / ci[-1]
        cj = cj / cj[-1]

    psi_t = _psi_table(ci, cj)
    lo = np.concatenate(([0], psi_t[:-1]))
    hi_b = psi_t
    ci_prev = np.concatenate(([0.0], ci[:-1]))
    cj_prev = np.concatenate(([0.0], cj[:-1]))
    mass = ci - ci_prev
    defined = mass > 0

    # Weighted sum of target bins over the matched span: boundary sub-bins
    # get the cumulative differences, interior bins their full count.
    bins = np.arange(BINS, dtype=np.float64)
    weighted_cum = np.cumsum(bins * (cj - cj_prev))
    first = (cj[lo] - ci_prev) * lo
    last = (ci - cj_prev[hi_b]) * hi_b
    interior = weighted_cum[np.maximum(hi_b - 1, 0)] - weighted_cum[lo]
    split = first + np.where(hi_b > lo, interior, 0.0) + last

    with np.errstate(invalid="ignore", divide="ignore"):
        lam = np.where(lo == hi_b, lo.astype(np.float64), split / mass)
    lam = np.where(defined, lam, np.nan)
    return lam, defined


@dataclass
class Imf:
    """Per-channel intensity mapping tables with defined-bin masks."""

    lam: np.ndarray      # (3, 256) float64, mapped intensity per source bin
    defined: np.ndarray  # (3, 256) bool, bins that held samples

    def __post_init__(self):
        self.lam = np.asarray(self.lam, dtype=np.float64)
        self.defined = np.asarray(self.defined, dtype=bool)
        if self.lam.shape != (3, BINS) or self.defined.shape != (3, BINS):
            raise InputError("mapping tables must have shape (3, 256)")

    @property
    def fully_defined(self) -> bool:
        return bool(self.defined.all())


def imf_from_channels(channels: list[tuple[np.ndarray, np.ndarray]]) -> Imf:
    if len(channels) != 3:
        raise InputError("expected one mapping per RGB channel")
    return Imf(
        lam=np.stack([lam for lam, _ in channels]),
        defined=np.stack([mask for _, mask in channels]),
    )


def fill_empty_bins(imf: Imf) -> Imf:
    """Linear interpolation across undefined bins, clamped extension at
    the ends; result is fully defined and keeps monotonicity."""
    lam = imf.lam.copy()
    for channel in range(3):
        known = np.flatnonzero(imf.defined[channel])
        if known.size == 0:
            raise InputError(f"channel {channel}: no defined bins to interpolate")
        lam[channel] = np.interp(np.arange(BINS), known, lam[channel, known])
    return Imf(lam=lam, defined=np.ones((3, BINS), dtype=bool))


def estimate_imf_pair(a: np.ndarray, b: np.ndarray) -> tuple[Imf, Imf]:
    """Both mapping directions between two equally sized 8-bit images,
    estimated per channel and interpolated to full coverage."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise InputError(f"shape mismatch: {a.shape} vs {b.shape}")
    forward = []
    backward = []
    for channel in range(3):
        ha = histogram(a, channel)
        hb = histogram(b, channel)
        forward.append(build_imf(ha, hb))
        backward.append(build_imf(hb, ha))
    return (
        fill_empty_bins(imf_from_channels(forward)),
        fill_empty_bins(imf_from_channels(backward)),
    )


def estimate_imf_images(a: np.ndarray, b: np.ndarray) -> Imf:
    """One-direction mapping between two whole images whose sizes may
    differ; falls back to relative-frequency matching when they do."""
    a = np.asarray(a)
    b = np.asarray(b)
    channels = []
    for channel in range(3):
        ha = histogram(a, channel)
        hb = histogram(b, channel)
        channels.append(build_imf(ha, hb, normalize=ha.sum() != hb.sum()))
    return fill_empty_bins(imf_from_channels(channels))


def compose_imf(first: Imf, second: Imf) -> Imf:
    """Chain two mappings, linearly interpolating the second table at the
    fractional outputs of the first."""
    for name, imf in (("first", first), ("second", second)):
        if not imf.fully_defined:
            raise InputError(f"{name} mapping has undefined bins; fill them first")
    bins = np.arange(BINS, dtype=np.float64)
    lam = np.stack(
        [np.interp(first.lam[c], bins, second.lam[c]) for c in range(3)]
    )
    return Imf(lam=lam, defined=np.ones((3, BINS), dtype=bool))


def apply_imf(imf: Imf, image: np.ndarray) -> np.ndarray:
    """Map an 8-bit image through the per-channel tables; float output."""
    if not imf.fully_defined:
        raise InputError("mapping has undefined bins; fill them first")
    image = np.asarray(image)
    if image.dtype != np.uint8 or image.ndim != 3 or image.shape[2] != 3:
        raise InputError("apply_imf expects an 8-bit RGB image")
    out = np.empty(image.shape, dtype=np.float64)
    for channel in range(3):
        out[..., channel] = imf.lam[channel][image[..., channel]]
    return out


def identity_imf() -> Imf:
    bins = np.arange(BINS, dtype=np.float64)
    return Imf(lam=np.tile(bins, (3, 1)), defined=np.ones((3, BINS), dtype=bool))


_HEADER = "wha-imf v1 channels=3"


def save_imf(imf: Imf, path: Path | str) -> None:
    """Serialize to the plain-text mapping format (one row per bin)."""
    lines = [_HEADER]
    for z in range(BINS):
        values = " ".join(format(imf.lam[c, z], ".17g") for c in range(3))
        flags = " ".join("1" if imf.defined[c, z] else "0" for c in range(3))
        lines.append(f"{z} {values} {flags}")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n")


def load_imf(path: Path | str) -> Imf:
    path = Path(path)
    if not path.exists():
        raise InputError(f"mapping file not found: {path}")
    lines = path.read_text().splitlines()
    if not lines or lines[0].strip() != _HEADER:
        raise InputError(f"{path}: bad header, expected {_HEADER!r}")
    body = [line for line in lines[1:] if line.strip()]
    if len(body) != BINS:
        raise InputError(f"{path}: expected {BINS} rows, got {len(body)}")
    lam = np.empty((3, BINS), dtype=np.float64)
    defined = np.empty((3, BINS), dtype=bool)
    for row, line in enumerate(body):
        parts = line.split()
        if len(parts) != 7:
            raise InputError(f"{path}: row {row}: expected 7 columns")
        if int(parts[0]) != row:
            raise InputError(f"{path}: row {row}: bin index mismatch")
        lam[:, row] = [float(p) for p in parts[1:4]]
        defined[:, row] = [p == "1" for p in parts[4:7]]
    return Imf(lam=lam, defined=defined)
