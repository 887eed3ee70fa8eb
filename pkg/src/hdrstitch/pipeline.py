"""End-to-end stitching: mapping estimation, panorama assembly, fusion,
and detail recovery, with optional intermediate dumps."""

from __future__ import annotations

import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import detail as detail_mod
from . import mef, pano, wha
from .core import InputError, ViewSet, extract_overlap, quantize, save_image
from .detail import SolverConfig
from .pano import ExposureRenditionSet, PanoImage
from .wha import Imf


@dataclass
class StitchConfig:
    solver: SolverConfig = field(default_factory=SolverConfig)
    mef_depth: int | None = None
    refined_dir: Path | None = None
    emit_dir: Path | None = None


@dataclass
class StitchResult:
    final: np.ndarray
    panos: tuple[PanoImage, PanoImage, PanoImage]
    fused: PanoImage
    detail: np.ndarray
    imfs: dict[tuple[int, int], Imf]
    timings: dict[str, float]


@contextmanager
def _stage(name: str, timings: dict[str, float]):
    start = time.perf_counter()
    try:
        yield
    except (InputError, detail_mod.ConvergenceError) as exc:
        raise type(exc)(f"stage '{name}': {exc}") from exc
    finally:
        timings[name] = time.perf_counter() - start


def estimate_all_imfs(viewset: ViewSet) -> dict[tuple[int, int], Imf]:
    """The four mappings between adjacent views from their shared overlap
    bands, plus the two outer mappings by composition through view 2."""
    layout = viewset.layout
    imf12, imf21 = wha.estimate_imf_pair(
        extract_overlap(viewset.z1, 1, "right", layout),
        extract_overlap(viewset.z2, 2, "left", layout),
    )
    imf23, imf32 = wha.estimate_imf_pair(
        extract_overlap(viewset.z2, 2, "right", layout),
        extract_overlap(viewset.z3, 3, "left", layout),
    )
    return {
        (1, 2): imf12,
        (2, 1): imf21,
        (2, 3): imf23,
        (3, 2): imf32,
        (1, 3): wha.compose_imf(imf12, imf23),
        (3, 1): wha.compose_imf(imf32, imf21),
    }


def detail_visualization(detail: np.ndarray) -> np.ndarray:
    """Detail map rescaled to a gray-centered 8-bit raster for dumps."""
    span = max(float(np.abs(detail).max()), 1e-12)
    return quantize(127.5 + detail * (127.5 / span))


def stitch(viewset: ViewSet, cfg: StitchConfig | None = None) -> StitchResult:
    """Run the full pipeline on one scene."""
    if cfg is None:
        cfg = StitchConfig()
    layout = viewset.layout
    timings: dict[str, float] = {}

    with _stage("imf", timings):
        imfs = estimate_all_imfs(viewset)

    with _stage("rendition", timings):
        mapped = {
            (i, j): wha.apply_imf(imfs[(i, j)], viewset.views[i - 1])
            for (i, j) in pano.RENDITION_PAIRS
        }
        renditions = ExposureRenditionSet(
            direct=viewset.views,
            mapped=mapped,
            source={pair: "physics" for pair in pano.RENDITION_PAIRS},
        )

    if cfg.refined_dir is not None:
        with _stage("refined", timings):
            renditions = pano.load_refined(cfg.refined_dir, renditions)

    with _stage("pano", timings):
        panos = tuple(
            pano.synthesize_pano(level, renditions, layout) for level in (1, 2, 3)
        )

    with _stage("fuse", timings):
        fused = mef.fuse(list(panos), depth=cfg.mef_depth)

    with _stage("detail", timings):
        if cfg.solver.lam == 0.0:
            detail_map = np.zeros_like(fused.data)
            enhanced = fused
        else:
            level_logs = [detail_mod.log_domain(p.data) for p in panos]
            guidance = detail_mod.guidance_field(level_logs, layout)
            detail_map = detail_mod.solve_detail(guidance, cfg.solver)
            enhanced = detail_mod.recombine(fused, detail_map, cfg.solver)

    final = quantize(enhanced.data)

    if cfg.emit_dir is not None:
        with _stage("emit", timings):
            emit = Path(cfg.emit_dir)
            emit.mkdir(parents=True, exist_ok=True)
            for (i, j), rendition in renditions.mapped.items():
                save_image(quantize(rendition), emit / f"z{i}_to_{j}.png")
            for level, pano_img in enumerate(panos, start=1):
                save_image(quantize(pano_img.data), emit / f"pano_{level}.png")
            save_image(quantize(fused.data), emit / "fused.png")
            save_image(detail_visualization(detail_map), emit / "detail.png")

    return StitchResult(
        final=final,
        panos=panos,
        fused=fused,
        detail=detail_map,
        imfs=imfs,
        timings=timings,
    )
