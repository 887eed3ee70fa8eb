"""Data model for three-view exposure-bracketed panoramas.

Shared image and layout types, scene-directory ingestion, 8-bit/float
conversion, overlap extraction, plus the synthetic-scene generator and
the misalignment cropper used for robustness evaluation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

# Raster formats accepted for scene files, in lookup order.
IMAGE_EXTENSIONS = (".png", ".ppm", ".pnm", ".bmp", ".tif", ".tiff")

REGION_TAGS = ("chi1", "xi12", "chi2", "xi23", "chi3")

# Synthetic scenes: radiance spans DYNAMIC_RANGE_BITS octaves starting at
# 2**LOG2_RADIANCE_FLOOR. The response saturates at SATURATION_INPUT,
# placed so a 1:2:4 bracket just grazes clipping at the longest exposure:
# the short exposures crush the deep shadows instead, which quantization
# absorbs, whereas content far past the knee is unrecoverable by any
# intensity mapping and would leave cliffs in the mapped renditions.
DYNAMIC_RANGE_BITS = 13.0
LOG2_RADIANCE_FLOOR = -2.0
SATURATION_INPUT = 2.0 ** 13
GAMMA = 1.0 / 2.2


class InputError(ValueError):
    """Invalid input data, file, or geometry. Mapped to CLI exit code 2."""


@dataclass(frozen=True)
class PanoLayout:
    """Column geometry of a horizontal three-view strip panorama.

    Views are numbered 1..3 left to right with increasing exposure time.
    Adjacent views share vertically full-height overlap bands; all column
    ranges derived here are half-open ``[start, end)``.
    """

    view_width: int
    view_height: int
    overlap12_width: int
    overlap23_width: int
    exposure_ratios: tuple[float, float, float] = (1.0, 2.0, 4.0)

    def __post_init__(self):
        if self.view_width <= 0 or self.view_height <= 0:
            raise InputError("view dimensions must be positive")
        for name in ("overlap12_width", "overlap23_width"):
            width = getattr(self, name)
            if not 0 < width < self.view_width:
                raise InputError(
                    f"{name}={width} must be positive and smaller than "
                    f"view_width={self.view_width}"
                )
        r = self.exposure_ratios
        if not (0 < r[0] < r[1] < r[2]):
            raise InputError(f"exposure ratios must be strictly increasing, got {r}")

    @property
    def pano_width(self) -> int:
        return 3 * self.view_width - self.overlap12_width - self.overlap23_width

    @property
    def view_offsets(self) -> tuple[int, int, int]:
        """Leftmost panorama column of each view."""
        return (
            0,
            self.view_width - self.overlap12_width,
            2 * self.view_width - self.overlap12_width - self.overlap23_width,
        )

    @property
    def region_bounds(self) -> dict[str, tuple[int, int]]:
        """Half-open column ranges of the five panorama regions."""
        off2 = self.view_offsets[1]
        off3 = self.view_offsets[2]
        return {
            "chi1": (0, off2),
            "xi12": (off2, self.view_width),
            "chi2": (self.view_width, off3),
            "xi23": (off3, off2 + self.view_width),
            "chi3": (off2 + self.view_width, self.pano_width),
        }


def region_of(column: int, layout: PanoLayout) -> str:
    """Region tag of a panorama column."""
    if not 0 <= column < layout.pano_width:
        raise InputError(
            f"column {column} outside panorama [0, {layout.pano_width})"
        )
    for tag, (start, end) in layout.region_bounds.items():
        if start <= column < end:
            return tag
    raise AssertionError("region ranges must partition the panorama")


@dataclass
class ViewSet:
    """The three exposure-ordered views of one scene."""

    z1: np.ndarray
    z2: np.ndarray
    z3: np.ndarray
    layout: PanoLayout

    def __post_init__(self):
        expected = (self.layout.view_height, self.layout.view_width, 3)
        for name, img in (("z1", self.z1), ("z2", self.z2), ("z3", self.z3)):
            if img.shape != expected:
                raise InputError(
                    f"view {name} has shape {img.shape}, layout expects {expected}"
                )
            if img.dtype != np.uint8:
                raise InputError(f"view {name} must be 8-bit, got {img.dtype}")

    @property
    def views(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return (self.z1, self.z2, self.z3)


def to_float(image: np.ndarray) -> np.ndarray:
    """8-bit samples to float64, keeping the [0, 255] working range."""
    return np.asarray(image, dtype=np.float64)


def quantize(image: np.ndarray) -> np.ndarray:
    """Round half up and clamp to the 8-bit range."""
    data = np.asarray(image, dtype=np.float64)
    if not np.isfinite(data).all():
        raise InputError("cannot quantize non-finite samples")
    return np.clip(np.floor(data + 0.5), 0.0, 255.0).astype(np.uint8)


def luminance(image: np.ndarray) -> np.ndarray:
    """Rec.601 luma of an RGB image."""
    img = np.asarray(image, dtype=np.float64)
    return 0.299 * img[..., 0] + 0.587 * img[..., 1] + 0.114 * img[..., 2]


def load_image(path: Path | str) -> np.ndarray:
    path = Path(path)
    if not path.exists():
        raise InputError(f"image file not found: {path}")
    with Image.open(path) as handle:
        return np.asarray(handle.convert("RGB"), dtype=np.uint8)


def save_image(image: np.ndarray, path: Path | str) -> None:
    image = np.asarray(image)
    if image.dtype != np.uint8:
        raise InputError("only 8-bit images are written; quantize first")
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(image, mode="RGB").save(path)


def _find_image(directory: Path, stem: str) -> Path | None:
    for ext in IMAGE_EXTENSIONS:
        candidate = directory / (stem + ext)
        if candidate.exists():
            return candidate
    return None


def _parse_layout_file(path: Path) -> PanoLayout:
    if not path.exists():
        raise InputError(f"missing layout file: {path}")
    entries: dict[str, float] = {}
    for line_no, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InputError(f"{path}:{line_no}: expected key=value, got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        try:
            entries[key] = float(value)
        except ValueError as exc:
            raise InputError(f"{path}:{line_no}: bad value for {key}: {value!r}") from exc
    required = ("view_width", "view_height", "overlap12_width", "overlap23_width")
    missing = [key for key in required if key not in entries]
    if missing:
        raise InputError(f"{path}: missing layout keys: {', '.join(missing)}")
    ev_gap = entries.get("ev_gap", 1.0)
    if ev_gap <= 0:
        raise InputError(f"{path}: ev_gap must be positive, got {ev_gap}")
    return PanoLayout(
        view_width=int(entries["view_width"]),
        view_height=int(entries["view_height"]),
        overlap12_width=int(entries["overlap12_width"]),
        overlap23_width=int(entries["overlap23_width"]),
        exposure_ratios=(1.0, 2.0 ** ev_gap, 2.0 ** (2.0 * ev_gap)),
    )


def load_viewset(scene_dir: Path | str) -> ViewSet:
    """Load z1/z2/z3 plus layout.txt from a scene directory."""
    scene_dir = Path(scene_dir)
    if not scene_dir.is_dir():
        raise InputError(f"scene directory not found: {scene_dir}")
    layout = _parse_layout_file(scene_dir / "layout.txt")
    views = []
    for index in (1, 2, 3):
        path = _find_image(scene_dir, f"z{index}")
        if path is None:
            raise InputError(f"missing view z{index} in {scene_dir}")
        views.append(load_image(path))
    return ViewSet(*views, layout=layout)


def save_scene(
    scene_dir: Path | str,
    viewset: ViewSet,
    gt_panos: tuple[np.ndarray, np.ndarray, np.ndarray] | None = None,
) -> None:
    """Write a scene directory; ground truth, when given, adds the six
    per-view target renditions and the full panoramas."""
    scene_dir = Path(scene_dir)
    scene_dir.mkdir(parents=True, exist_ok=True)
    layout = viewset.layout
    ev_gap = math.log2(layout.exposure_ratios[1] / layout.exposure_ratios[0])
    lines = [
        f"view_width={layout.view_width}",
        f"view_height={layout.view_height}",
        f"overlap12_width={layout.overlap12_width}",
        f"overlap23_width={layout.overlap23_width}",
        f"ev_gap={ev_gap:g}",
    ]
    (scene_dir / "layout.txt").write_text("\n".join(lines) + "\n")
    for index, view in enumerate(viewset.views, start=1):
        save_image(view, scene_dir / f"z{index}.png")
    if gt_panos is not None:
        for (i, j), rendition in ground_truth_renditions(gt_panos, layout).items():
            save_image(rendition, scene_dir / f"zT_{i}_to_{j}.png")
        for level, pano in enumerate(gt_panos, start=1):
            save_image(pano, scene_dir / f"gt_pano_{level}.png")


def load_ground_truth_renditions(
    scene_dir: Path | str, layout: PanoLayout
) -> dict[tuple[int, int], np.ndarray]:
    """Load whichever zT_<i>_to_<j> target renditions the scene provides."""
    scene_dir = Path(scene_dir)
    found = {}
    expected = (layout.view_height, layout.view_width, 3)
    for i in (1, 2, 3):
        for j in (1, 2, 3):
            if i == j:
                continue
            path = _find_image(scene_dir, f"zT_{i}_to_{j}")
            if path is None:
                continue
            img = load_image(path)
            if img.shape != expected:
                raise InputError(
                    f"{path}: shape {img.shape} does not match views {expected}"
                )
            found[(i, j)] = img
    return found


def ground_truth_renditions(
    gt_panos: tuple[np.ndarray, np.ndarray, np.ndarray], layout: PanoLayout
) -> dict[tuple[int, int], np.ndarray]:
    """Crop the panorama ground truths into per-view target renditions."""
    offsets = layout.view_offsets
    out = {}
    for i in (1, 2, 3):
        start = offsets[i - 1]
        for j in (1, 2, 3):
            if i != j:
                out[(i, j)] = gt_panos[j - 1][:, start : start + layout.view_width]
    return out


def extract_overlap(
    view: np.ndarray, view_index: int, side: str, layout: PanoLayout
) -> np.ndarray:
    """Overlap band of one view: ('right' of view 1 | 'left'/'right' of
    view 2 | 'left' of view 3)."""
    if side not in ("left", "right"):
        raise InputError(f"side must be 'left' or 'right', got {side!r}")
    if view_index not in (1, 2, 3):
        raise InputError(f"view_index must be 1..3, got {view_index}")
    if (view_index, side) in ((1, "left"), (3, "right")):
        raise InputError(f"view {view_index} has no {side} overlap")
    width = layout.overlap12_width if (view_index, side) in ((1, "right"), (2, "left")) \
        else layout.overlap23_width
    if side == "left":
        return view[:, :width]
    return view[:, view.shape[1] - width :]


def simulate_misalignment(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Crop a pair diagonally in opposite directions by 10 pixels each,
    mimicking registration error while keeping identical output sizes."""
    if a.shape != b.shape:
        raise InputError(f"shape mismatch: {a.shape} vs {b.shape}")
    height, width = a.shape[:2]
    if height < 11 or width < 11:
        raise InputError(f"images must be at least 11x11, got {height}x{width}")
    a_crop = a[0 : height - 10, 10:width]
    b_crop = b[10:height, 0 : width - 10]
    return a_crop, b_crop


def response_curve(exposure_input: np.ndarray) -> np.ndarray:
    """Smooth monotone camera response, clipped at SATURATION_INPUT."""
    x = np.clip(np.asarray(exposure_input, dtype=np.float64) / SATURATION_INPUT, 0.0, 1.0)
    return 255.0 * x ** GAMMA


def render_exposure(radiance: np.ndarray, exposure: float) -> np.ndarray:
    """Pre-quantization sensor output for one exposure setting."""
    if exposure <= 0:
        raise InputError(f"exposure must be positive, got {exposure}")
    return response_curve(np.asarray(radiance, dtype=np.float64) * exposure)


def _gaussian_bump(
    ys: np.ndarray, xs: np.ndarray, cy: float, cx: float, sy: float, sx: float
) -> np.ndarray:
    return np.exp(
        -((xs - cx) ** 2 / (2.0 * sx * sx) + (ys - cy) ** 2 / (2.0 * sy * sy))
    )


def _vertical_sweep(rng: np.random.Generator, height: int) -> np.ndarray:
    """Monotone top-to-bottom column profile from two off-image Gaussian
    tails, min-max normalized to [0, 1].  Exactly constant along rows."""
    ys = np.arange(height, dtype=np.float64)
    flip = -1.0 if rng.uniform() < 0.5 else 1.0
    sigma = rng.uniform(0.40, 0.55) * height
    gap = rng.uniform(0.30, 0.45) * height
    sweep = flip * (
        np.exp(-((ys - (height + gap)) ** 2) / (2.0 * sigma * sigma))
        - np.exp(-((ys + gap) ** 2) / (2.0 * sigma * sigma))
    )
    return (sweep - sweep.min()) / (sweep.max() - sweep.min())


def _calm_x_coordinates(layout: PanoLayout) -> np.ndarray:
    """Smooth monotone remap of panorama column indices whose derivative is
    exactly zero in a small window around each interior region boundary.

    Structure evaluated on the remapped axis is locally constant across the
    blend boundaries, so boundary columns carry no horizontal quantization
    staircase of their own and seam measurements isolate stitching error.
    """
    width = layout.pano_width
    half = max(2.0, min(24.0, min(layout.overlap12_width, layout.overlap23_width) / 8.0))
    ramp = 2.0 * half
    xs = np.arange(width, dtype=np.float64)
    rate = np.ones(width, dtype=np.float64)
    for start, _ in layout.region_bounds.values():
        if start == 0:
            continue
        t = (np.abs(xs - (start - 0.5)) - half) / ramp
        t = np.clip(t, 0.0, 1.0)
        rate = np.minimum(rate, t * t * (3.0 - 2.0 * t))
    warped = np.concatenate(([0.0], np.cumsum(rate)[:-1]))
    return warped * ((width - 1.0) / max(warped[-1], 1.0))


def _bump_field(
    rng: np.random.Generator,
    height: int,
    xs: np.ndarray,
    count_range: tuple[int, int] = (8, 15),
    sx_range: tuple[float, float] = (0.20, 0.40),
    sy_range: tuple[float, float] = (0.15, 0.40),
) -> np.ndarray:
    """Sum of random smooth 2-D Gaussian bumps, scaled to peak magnitude 1."""
    width = xs.shape[0]
    ys = np.arange(height, dtype=np.float64)[:, None]
    field = np.zeros((height, width), dtype=np.float64)
    for _ in range(int(rng.integers(*count_range))):
        cx = rng.uniform(0.0, width)
        cy = rng.uniform(0.0, height)
        sx = rng.uniform(*sx_range) * width
        sy = rng.uniform(*sy_range) * height
        amp = rng.uniform(-1.0, 1.0)
        field = field + amp * _gaussian_bump(ys, xs[None, :], cy, cx, sy, sx)
    peak = np.abs(field).max()
    return field / peak if peak > 1e-12 else field


def scene_radiance(seed: int, layout: PanoLayout) -> np.ndarray:
    """Panorama-sized RGB radiance map spanning the full dynamic range.

    A monotone vertical sweep dominates and the 2-D structure is faded out
    where the sweep peaks, so every full-height column band (in particular
    both overlap bands) reaches the scene's global brightness ceiling and
    covers essentially the full intensity range of its view.
    """
    rng = np.random.default_rng(seed)
    height = layout.view_height
    sweep = _vertical_sweep(rng, height)[:, None]
    xs = _calm_x_coordinates(layout)
    base = _bump_field(rng, height, xs)
    tints = np.stack([_bump_field(rng, height, xs) for _ in range(3)], axis=-1)
    structure = 0.16 * base[..., None] + 0.05 * tints
    field = sweep[..., None] + (1.0 - sweep[..., None]) * structure
    field = (field - field.min()) / max(field.max() - field.min(), 1e-12)
    return 2.0 ** (DYNAMIC_RANGE_BITS * field + LOG2_RADIANCE_FLOOR)


def synthesize_exposure_pair(
    seed: int, height: int = 720, width: int = 960, ratio: float = 2.0
) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic aligned exposure pair of one synthetic scene.

    Built from many small bumps and no global gradient, so the intensity
    statistics are nearly invariant to modest spatial shifts of the window.
    Returns uint8 images (reference exposure, reference times ``ratio``).
    """
    rng = np.random.default_rng(seed)
    xs = np.arange(width, dtype=np.float64)
    base = _bump_field(
        rng, height, xs,
        count_range=(24, 41), sx_range=(0.03, 0.10), sy_range=(0.03, 0.10),
    )
    tint = _bump_field(
        rng, height, xs,
        count_range=(12, 21), sx_range=(0.05, 0.15), sy_range=(0.05, 0.15),
    )
    coeffs = np.array([0.25, 0.15, 0.35])
    field = base[..., None] + tint[..., None] * coeffs
    field = (field - field.min()) / max(field.max() - field.min(), 1e-12)
    radiance = 2.0 ** (DYNAMIC_RANGE_BITS * field + LOG2_RADIANCE_FLOOR)
    return (
        quantize(render_exposure(radiance, 1.0)),
        quantize(render_exposure(radiance, ratio)),
    )


def synthesize_test_scene(
    seed: int, layout: PanoLayout
) -> tuple[ViewSet, tuple[np.ndarray, np.ndarray, np.ndarray]]:
    """Deterministic synthetic scene: three exposure-bracketed views plus
    the full-panorama ground-truth rendering at each exposure."""
    radiance = scene_radiance(seed, layout)
    gt_panos = tuple(
        quantize(render_exposure(radiance, ratio)) for ratio in layout.exposure_ratios
    )
    offsets = layout.view_offsets
    views = [
        gt_panos[index][:, offsets[index] : offsets[index] + layout.view_width].copy()
        for index in range(3)
    ]
    return ViewSet(*views, layout=layout), gt_panos
