"""Panorama assembly at each exposure level.

Places the three views on the shared canvas and fills every column from
the level's own view where available, from intensity-mapped renditions of
the other views elsewhere, with linear cross-fades inside the two
overlap bands.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .core import IMAGE_EXTENSIONS, InputError, PanoLayout, load_image, to_float

# The six mapped directions (source view, target exposure level).
RENDITION_PAIRS = ((1, 2), (1, 3), (2, 1), (2, 3), (3, 1), (3, 2))


@dataclass
class PanoImage:
    """Float panorama raster plus the layout it was assembled under."""

    data: np.ndarray
    layout: PanoLayout

    def __post_init__(self):
        expected = (self.layout.view_height, self.layout.pano_width, 3)
        if self.data.shape != expected:
            raise InputError(
                f"panorama shape {self.data.shape} does not match layout {expected}"
            )
        if not np.isfinite(self.data).all():
            raise InputError("panorama contains non-finite samples")


@dataclass
class ExposureRenditionSet:
    """Original views plus all six cross-exposure renditions.

    ``mapped[(i, j)]`` is view i re-rendered at view j's exposure; the
    parallel ``source`` dict records whether each rendition came from the
    histogram mapping ('physics') or an external refinement ('refined').
    """

    direct: tuple[np.ndarray, np.ndarray, np.ndarray]
    mapped: dict[tuple[int, int], np.ndarray]
    source: dict[tuple[int, int], str]

    def __post_init__(self):
        shape = self.direct[0].shape
        for img in self.direct[1:]:
            if img.shape != shape:
                raise InputError("views differ in shape")
        for pair in RENDITION_PAIRS:
            if pair not in self.mapped:
                raise InputError(f"missing rendition for direction {pair}")
            if self.mapped[pair].shape != shape:
                raise InputError(f"rendition {pair} shape differs from views")
            if pair not in self.source:
                raise InputError(f"missing source tag for direction {pair}")


def phi21(column: float, layout: PanoLayout) -> float:
    """Cross-fade weight of view 1 inside the first overlap band."""
    start, end = layout.region_bounds["xi12"]
    if not start <= column < end:
        raise InputError(f"column {column} outside overlap [{start}, {end})")
    return (end - column) / (end - start)


def phi32(column: float, layout: PanoLayout) -> float:
    """Cross-fade weight of view 2 inside the second overlap band."""
    start, end = layout.region_bounds["xi23"]
    if not start <= column < end:
        raise InputError(f"column {column} outside overlap [{start}, {end})")
    return (end - column) / (end - start)


def _ramp(start: int, end: int) -> np.ndarray:
    columns = np.arange(start, end, dtype=np.float64)
    return (end - columns) / (end - start)


def synthesize_pano(
    level: int, renditions: ExposureRenditionSet, layout: PanoLayout
) -> PanoImage:
    """Assemble the exposure-level panorama from view content and
    renditions, cross-fading inside the overlap bands."""
    if level not in (1, 2, 3):
        raise InputError(f"exposure level must be 1..3, got {level}")

    def at_level(view: int) -> np.ndarray:
        if view == level:
            return to_float(renditions.direct[view - 1])
        return np.asarray(renditions.mapped[(view, level)], dtype=np.float64)

    offsets = layout.view_offsets
    bounds = layout.region_bounds
    height = renditions.direct[0].shape[0]
    out = np.empty((height, layout.pano_width, 3), dtype=np.float64)

    def view_cols(view: int, start: int, end: int) -> np.ndarray:
        shift = offsets[view - 1]
        return at_level(view)[:, start - shift : end - shift]

    for tag, view in (("chi1", 1), ("chi2", 2), ("chi3", 3)):
        start, end = bounds[tag]
        out[:, start:end] = view_cols(view, start, end)
    for tag, left_view in (("xi12", 1), ("xi23", 2)):
        start, end = bounds[tag]
        weight = _ramp(start, end)[None, :, None]
        left = view_cols(left_view, start, end)
        right = view_cols(left_view + 1, start, end)
        out[:, start:end] = weight * left + (1.0 - weight) * right
    return PanoImage(data=out, layout=layout)


def load_refined(
    directory: Path | str, renditions: ExposureRenditionSet
) -> ExposureRenditionSet:
    """Swap in externally refined rendition rasters named z<i>_to_<j>."""
    directory = Path(directory)
    if not directory.is_dir():
        raise InputError(f"refined rendition directory not found: {directory}")
    expected = renditions.direct[0].shape
    mapped = dict(renditions.mapped)
    source = dict(renditions.source)
    for i, j in RENDITION_PAIRS:
        path = None
        for ext in IMAGE_EXTENSIONS:
            candidate = directory / f"z{i}_to_{j}{ext}"
            if candidate.exists():
                path = candidate
                break
        if path is None:
            # A direction without a refined raster keeps its current
            # rendition; an empty directory leaves the set unchanged.
            continue
        img = load_image(path)
        if img.shape != expected:
            raise InputError(
                f"refined rendition z{i}_to_{j}: shape {img.shape} does not "
                f"match views {expected}"
            )
        mapped[(i, j)] = to_float(img)
        source[(i, j)] = "refined"
    return replace(renditions, mapped=mapped, source=source)
